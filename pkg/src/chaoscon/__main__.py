import sys

from chaoscon.harness.cli import main

sys.exit(main())
