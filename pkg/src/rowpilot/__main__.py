import sys

from rowpilot.cli import main

sys.exit(main())
