import sys

from freqnet.cli import main

sys.exit(main())
