import sys

from detmax.cli import main

sys.exit(main())
