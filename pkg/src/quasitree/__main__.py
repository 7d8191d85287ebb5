import sys

from quasitree.cli import main

sys.exit(main())
