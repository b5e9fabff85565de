import sys

from gprotor.cli import main

sys.exit(main())
