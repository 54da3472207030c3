import sys

from scalecp.cli import main

sys.exit(main())
