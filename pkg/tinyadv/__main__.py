import sys

from tinyadv.cli import main

sys.exit(main())
