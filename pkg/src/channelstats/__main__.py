import sys

from channelstats.cli import main

sys.exit(main())
