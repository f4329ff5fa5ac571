import sys

from rydkick.cli import main

sys.exit(main())
