import sys

from adlbr.cli import main

sys.exit(main())
