import sys

from sega.harness.cli import main

sys.exit(main())
