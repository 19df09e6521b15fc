import sys

from darcymg.cli import main

sys.exit(main())
