import sys

from stt.main import main

sys.exit(main())
