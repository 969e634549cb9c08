import sys

from qbspeed.cli.main import main

sys.exit(main())
