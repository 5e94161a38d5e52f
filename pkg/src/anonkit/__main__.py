import sys

from anonkit.cli import main

sys.exit(main())
