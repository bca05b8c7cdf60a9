import sys

from expforge.cli import main

sys.exit(main())
