import sys

from tpdc.cli.main import main

sys.exit(main())
