"""
Experiment handlers for the command-line front end.

Each handler takes a parsed ExperimentConfig, writes its CSV/JSON outputs under
the configured output directory and returns a standardized response
{"exit_code", "outputs", "summary"}. Library errors propagate to the caller.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from qbspeed.bounds.classical import (
    biseparable_bound,
    example1_closed,
    incoherent_bound_enumerate,
    inhomogeneous_upper_bound,
    separable_bound_optimize,
)
from qbspeed.bounds.ising import (
    ISING_SWEEP_HEADER,
    ising_asymptote,
    ising_fs_closed,
    ising_fs_grid_optimum,
    ising_gamma_c_printed,
    ising_sweep,
)
from qbspeed.bounds.optimizer import OptimizerConfig
from qbspeed.core.hamiltonians import (
    BareHamiltonianSpec,
    IsingSpec,
    ProbingHamiltonianSpec,
    axis_direction,
    bare_from_dict,
    build_bare,
    build_ising,
    build_probing,
    ising_from_dict,
    probing_from_dict,
    probing_to_dict,
)
from qbspeed.core.linalg import DensityMatrix, PureState, StateLike
from qbspeed.dynamics.battery import sample_trajectory, trajectory_to_csv
from qbspeed.dynamics.speed import maximize_over_bare, pure_state_speed
from qbspeed.errors import ConfigError, DimensionMismatchError, QBSpeedError
from qbspeed.utils import (
    DEFAULT_JOBS,
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    OUTPUT_DIR,
    build_response,
    write_csv,
    write_json,
)
from qbspeed.witnesses.states import ghz_state, state_from_dict
from qbspeed.witnesses.witness import (
    OVERLAP_TARGET,
    OVERLAP_TOL,
    SOUNDNESS_HEADER,
    best_coherence_basis_index,
    best_entanglement_partition,
    coherence_witness_hamiltonian,
    dicke_speed_check,
    entanglement_witness_hamiltonian,
    local_probing,
    sigma_z_power_claim,
    sites_of,
    soundness_sweep,
    witness_report,
)

logger = logging.getLogger(__name__)

EXPERIMENTS = ('speed', 'bounds', 'ising-sweep', 'witness', 'examples', 'verify')
EXAMPLES_HEADER = ('example', 'quantity', 'paper_value', 'oracle_value', 'discrepancy')


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed experiment document with command-line overrides applied."""
    experiment: str
    seed: int = DEFAULT_SEED
    jobs: int = DEFAULT_JOBS
    restarts: int = DEFAULT_RESTARTS
    output_path: Path = Path(OUTPUT_DIR)
    battery: Optional[BareHamiltonianSpec] = None
    probing: Optional[ProbingHamiltonianSpec] = None
    ising: Optional[IsingSpec] = None
    state: Optional[Dict[str, Any]] = None
    sweep: Optional[Dict[str, Any]] = None
    options: Dict[str, Any] = field(default_factory=dict)

    @property
    def unit_energy(self) -> float:
        if self.battery is not None:
            return self.battery.unit_energy
        return float(self.options.get('unit_energy', 1.0))

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(restarts=self.restarts, seed=self.seed, jobs=self.jobs)


def parse_config(body: Dict[str, Any], seed: Optional[int] = None, jobs: Optional[int] = None,
                 output: Optional[str] = None) -> ExperimentConfig:
    """
    Validate an experiment document.

    Args:
        body: Decoded JSON document
        seed: Overrides body['seed']
        jobs: Overrides body['jobs']
        output: Overrides body['output_path']

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: unknown experiment, malformed or invalid referenced specs
    """
    if not isinstance(body, dict):
        raise ConfigError("Experiment config must be a JSON object")
    experiment = body.get('experiment')
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"Unknown experiment '{experiment}' (expected one of {', '.join(EXPERIMENTS)})")
    try:
        sweep = body.get('sweep')
        if sweep is not None and int(sweep.get('points', 0)) < 2:
            raise ConfigError(f"Sweep grid needs at least 2 points, got {sweep.get('points')}")
        known = {'experiment', 'seed', 'jobs', 'restarts', 'output_path', 'battery', 'probing',
                 'ising', 'state', 'sweep'}
        config = ExperimentConfig(
            experiment=experiment,
            seed=int(seed if seed is not None else body.get('seed', DEFAULT_SEED)),
            jobs=int(jobs if jobs is not None else body.get('jobs', DEFAULT_JOBS)),
            restarts=int(body.get('restarts', DEFAULT_RESTARTS)),
            output_path=Path(output if output is not None else body.get('output_path', OUTPUT_DIR)),
            battery=bare_from_dict(body['battery']) if 'battery' in body else None,
            probing=probing_from_dict(body['probing']) if 'probing' in body else None,
            ising=ising_from_dict(body['ising']) if 'ising' in body else None,
            state=body.get('state'),
            sweep=sweep,
            options={key: value for key, value in body.items() if key not in known},
        )
        if config.ising is not None:
            build_ising(config.ising)
        if config.state is not None:
            resolve_state(config.state)
        config.optimizer()
        return config
    except ConfigError:
        raise
    except (QBSpeedError, KeyError, TypeError, ValueError, AttributeError) as e:
        raise ConfigError(f"Invalid experiment config: {e}") from e


def load_config(path: str, seed: Optional[int] = None, jobs: Optional[int] = None,
                output: Optional[str] = None) -> ExperimentConfig:
    """Read and validate an experiment JSON file."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            body = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    logger.info(f"Loaded {body.get('experiment')} experiment from {path}")
    return parse_config(body, seed=seed, jobs=jobs, output=output)


# Shared plumbing -------------------------------------------------------------

def resolve_state(body: Optional[Dict[str, Any]]) -> StateLike:
    """Named/explicit pure state, or {"mixture": [{"weight": w, "state": {...}}, ...]}."""
    if body is None:
        raise ConfigError("Experiment needs a 'state' block")
    try:
        if 'mixture' not in body:
            return state_from_dict(body)
        weights = [float(item['weight']) for item in body['mixture']]
        states = [state_from_dict(item['state']) for item in body['mixture']]
        return DensityMatrix.mixture(weights, states)
    except ConfigError:
        raise
    except (QBSpeedError, KeyError, TypeError, ValueError, AttributeError) as e:
        raise ConfigError(f"Invalid state {body}: {e}", details=getattr(e, 'details', None)) from e


def resolve_probing_spec(config: ExperimentConfig) -> ProbingHamiltonianSpec:
    if config.probing is not None:
        return config.probing
    if config.ising is not None:
        return build_ising(config.ising)
    raise ConfigError(f"Experiment '{config.experiment}' needs a 'probing' or 'ising' block")


def _grid(block: Dict[str, Any], lo_key: str, hi_key: str) -> np.ndarray:
    try:
        return np.linspace(float(block[lo_key]), float(block[hi_key]), int(block['points']))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed grid {block}: {e}") from e


# Experiments -----------------------------------------------------------------

def cmd_speed(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Energy trajectory CSV plus the bare-state speed supremum at one time.

    Outputs:
        trajectory.csv with t,F,F_complement,v,boundary and speed_report.json
    """
    if config.battery is None:
        raise ConfigError("Speed experiment needs a 'battery' block")
    H0 = build_bare(config.battery)
    H = build_probing(resolve_probing_spec(config))
    rho = resolve_state(config.state)
    if not rho.dim == H.dim == H0.dim:
        raise DimensionMismatchError(f"State {rho.dim}, probing {H.dim} and battery {H0.dim} dimensions differ")

    times = _grid(config.options.get('times', {'start': 0.0, 'stop': math.pi, 'points': 101}), 'start', 'stop')
    trajectory = sample_trajectory(rho, H, H0, times, unit_energy=config.unit_energy, jobs=config.jobs)
    csv_path = trajectory_to_csv(trajectory, config.output_path / 'trajectory.csv')

    t_report = float(config.options.get('report_time', times[len(times) // 2]))
    report = maximize_over_bare(rho, H, t_report, config.unit_energy, config.optimizer())
    body = report.to_dict()
    body['t'] = t_report
    json_path = write_json(config.output_path / 'speed_report.json', body)

    return build_response(0, [csv_path, json_path], {
        'points': len(times),
        'boundary_times': trajectory.boundary_times,
        'v_squared': report.v_squared,
        'saturation_ratio': report.saturation_ratio,
    })


def cmd_bounds(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Incoherent, fully separable and biseparable ceilings for one probing spec.

    Outputs:
        bounds.json with one BoundReport per class plus the printed upper bounds
    """
    spec = resolve_probing_spec(config)
    E = config.unit_energy
    optimizer = config.optimizer()
    reports = {
        'incoherent': incoherent_bound_enumerate(spec, E),
        'fully_separable': separable_bound_optimize(spec, E, config=optimizer),
    }
    if 2 <= spec.N <= 8:
        reports['biseparable'] = biseparable_bound(build_probing(spec), spec.N, spec.d, E, config=optimizer)
    body: Dict[str, Any] = {name: report.to_dict() for name, report in reports.items()}
    body['probing'] = probing_to_dict(spec)
    if spec.k == 2 and spec.u == spec.v:
        body['inhomogeneous_upper_bound'] = inhomogeneous_upper_bound(spec.alpha, spec.gamma, spec.N, E)
    if config.ising is not None:
        value, branch, gamma_c = ising_fs_closed(config.ising.N, config.ising.k, config.ising.a,
                                                 config.ising.gamma, E)
        body['ising_fs_closed'] = {'v_fs_sq': value, 'branch': branch, 'gamma_c': gamma_c}
    path = write_json(config.output_path / 'bounds.json', body)
    return build_response(0, [path], {name: report.oracle_value for name, report in reports.items()})


def cmd_ising_sweep(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Closed form against the separable oracle over a coupling grid.

    Outputs:
        ising_sweep.csv with gamma,v_fs_closed,v_fs_oracle,branch,gamma_c
    """
    if config.ising is None:
        raise ConfigError("Ising sweep needs an 'ising' block")
    if config.sweep is None:
        raise ConfigError("Ising sweep needs a 'sweep' block")
    ising = config.ising
    E = config.unit_energy
    gammas = _grid(config.sweep, 'min', 'max')
    rows = ising_sweep(ising.N, ising.k, ising.a, gammas, E, config.optimizer(),
                       with_oracle=bool(config.options.get('with_oracle', True)),
                       direction=ising.direction)
    path = write_csv(config.output_path / 'ising_sweep.csv', ISING_SWEEP_HEADER, rows)
    g_max = float(gammas[-1])
    closed_max = rows[-1][1]
    asymptote = ising_asymptote(ising.N, ising.k, g_max, E)
    return build_response(0, [path], {
        'gamma_c': rows[0][4],
        'gamma_c_printed': ising_gamma_c_printed(ising.N, ising.k, ising.a),
        'grid_optimum_at_max_gamma': ising_fs_grid_optimum(ising.N, ising.k, ising.a, g_max, E)[0],
        'asymptote_ratio_at_max_gamma': closed_max / asymptote if asymptote > 0 else None,
        'points': len(rows),
    })


def _local_dimension(phi, block: Dict[str, Any]) -> int:
    try:
        d = int(block.get('d', 2))
        if d < 2:
            raise ValueError(f"local dimension must be at least 2, got {d}")
        sites_of(phi.dim, d)
    except (QBSpeedError, TypeError, ValueError) as e:
        raise ConfigError(f"Witness local dimension does not fit the state: {e}") from e
    return d


def _witness_hamiltonian(config: ExperimentConfig, phi, block: Dict[str, Any], d: int = 2) -> tuple:
    kind = block.get('hamiltonian', 'local')
    if kind in ('coherence', 'entanglement') and not isinstance(phi, PureState):
        raise ConfigError(f"The {kind} witness is built from a pure state")
    if kind == 'local':
        N = sites_of(phi.dim, d)
        axis = block.get('axis', 'z')
        return local_probing(N, axis, float(block.get('a', 1.0)), d), f"local-{axis}", {}
    if kind == 'probing':
        return build_probing(resolve_probing_spec(config)), 'probing', {}
    if kind == 'coherence':
        index = block.get('basis_index')
        index = best_coherence_basis_index(phi) if index is None else int(index)
        H, lam = coherence_witness_hamiltonian(phi, index)
        return H, 'coherence-projector', {'basis_index': index, 'lambda': lam}
    if kind == 'entanglement':
        partition = block.get('partition')
        if partition is None:
            partition, _ = best_entanglement_partition(phi, d)
        partition = (tuple(partition[0]), tuple(partition[1]))
        H, overlap = entanglement_witness_hamiltonian(phi, partition, d)
        extra = {'partition': [list(partition[0]), list(partition[1])], 'overlap': overlap}
        if abs(overlap - OVERLAP_TARGET) > OVERLAP_TOL:
            extra['error'] = 'overlap-unreachable'
            extra['best_overlap'] = overlap
        return H, 'entanglement-projector', extra
    raise ConfigError(f"Unknown witness Hamiltonian '{kind}'")


def cmd_witness(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Witness verdict for one state against one classical class.

    An unreachable overlap is reported in the JSON with a non-strict verdict.

    Outputs:
        witness.json, and soundness.csv when a soundness block is present
    """
    block = config.options.get('witness', {})
    ceiling_class = block.get('ceiling_class', 'fully_separable')
    phi = resolve_state(config.state)
    E = config.unit_energy
    d = _local_dimension(phi, block)
    H, label, extra = _witness_hamiltonian(config, phi, block, d)
    verdict = witness_report(phi, H, ceiling_class, E, d=d, config=config.optimizer(), label=label)

    body = verdict.to_dict()
    body.update(extra)
    if 'error' in extra:
        body['witnessed'] = False
        logger.warning(f"Witness overlap unreachable, best {extra['best_overlap']:.6f}")
    outputs: List[Path] = []

    soundness = block.get('soundness')
    if soundness:
        rows, violations = soundness_sweep(ceiling_class, H, int(soundness.get('samples', 1000)), E,
                                           config.seed, d=d, config=config.optimizer())
        outputs.append(write_csv(config.output_path / 'soundness.csv', SOUNDNESS_HEADER, rows))
        body['soundness_violations'] = violations
    outputs.insert(0, write_json(config.output_path / 'witness.json', body))
    return build_response(0, outputs, {'witnessed': body['witnessed'], 'state_speed': verdict.state_speed,
                                       'classical_ceiling': verdict.classical_ceiling})


def example_rows(N: int, a: float, m: int, gamma: float, k: int, E: float,
                 optimizer: OptimizerConfig) -> List[tuple]:
    """Printed value against oracle for each worked example."""
    rows = []
    z, x = axis_direction(2, 'z'), axis_direction(2, 'x')
    for axis_name, direction in (('z', z), ('x', x)):
        spec = ProbingHamiltonianSpec(N=N, d=2, alpha=tuple([a] * N), v=tuple([direction] * N))
        printed = example1_closed(spec, E)
        oracle = incoherent_bound_enumerate(spec, E).oracle_value
        rows.append(('example1', f'incoherent_v_{axis_name}', printed, oracle, printed - oracle))

    oracle, claim, gap = sigma_z_power_claim(N, a, E)
    rows.append(('example1', 'sigma_z_power_on_plus', claim, oracle, gap))

    closed, branch, _ = ising_fs_closed(N, k, a, gamma, E)
    ising_spec = build_ising(IsingSpec(N=N, k=k, a=a, gamma=gamma))
    oracle = separable_bound_optimize(ising_spec, E, config=optimizer).oracle_value
    rows.append(('example2', f'ising_fs_{branch}', closed, oracle, closed - oracle))

    ghz_printed = N * N * E / 4
    ghz_oracle = pure_state_speed(ghz_state(N), local_probing(N, 'z'), E)
    rows.append(('example3', 'ghz_speed', ghz_printed, ghz_oracle, ghz_printed - ghz_oracle))

    oracle, printed, gap = dicke_speed_check(N, m, E)
    rows.append(('example3', f'dicke_m{m}_speed', printed, oracle, gap))
    return rows


def cmd_examples(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Discrepancy table for the worked examples; mismatches are kept, never dropped.

    Outputs:
        examples.csv and examples.json
    """
    block = config.options.get('examples', {})
    N = int(block.get('N', 4))
    rows = example_rows(N, float(block.get('a', 1.0)), int(block.get('dicke_m', 2)),
                        float(block.get('gamma', 0.5)), int(block.get('k', 1)), config.unit_energy,
                        config.optimizer())
    csv_path = write_csv(config.output_path / 'examples.csv', EXAMPLES_HEADER, rows)
    json_path = write_json(config.output_path / 'examples.json',
                           [dict(zip(EXAMPLES_HEADER, row)) for row in rows])
    flagged = [f"{r[0]}:{r[1]}" for r in rows if abs(r[4]) > 1e-6]
    for name in flagged:
        logger.warning(f"Printed value disagrees with oracle for {name}")
    return build_response(0, [csv_path, json_path], {'rows': len(rows), 'discrepancies': flagged})


def cmd_verify(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Run the invariant suites and write verify_report.json.

    Raises:
        VerificationFailure: any suite failed (after the report is written)
    """
    from qbspeed.cli.verify import format_table, raise_on_failure, run_suites

    block = config.options.get('verify', {})
    results = run_suites(seed=config.seed, fault=block.get('inject_fault'), only=block.get('suites'))
    logger.info("\n" + format_table(results))
    path = write_json(config.output_path / 'verify_report.json',
                      {'seed': config.seed, 'suites': [r.to_dict() for r in results]})
    raise_on_failure(results)
    return build_response(0, [path], {'passed': sum(r.passed for r in results), 'total': len(results)})


HANDLERS: Dict[str, Callable[[ExperimentConfig], Dict[str, Any]]] = {
    'speed': cmd_speed,
    'bounds': cmd_bounds,
    'ising-sweep': cmd_ising_sweep,
    'witness': cmd_witness,
    'examples': cmd_examples,
    'verify': cmd_verify,
}


def run_experiment(config: ExperimentConfig) -> Dict[str, Any]:
    logger.info(f"Running {config.experiment} experiment (seed={config.seed}, jobs={config.jobs})")
    return HANDLERS[config.experiment](config)
