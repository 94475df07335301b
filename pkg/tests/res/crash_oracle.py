"""dies after reading the first request"""

import sys

sys.stdin.readline()
sys.stderr.write('model crashed\n')
sys.exit(3)
