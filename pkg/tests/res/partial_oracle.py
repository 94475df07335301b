"""announces every label, sends the first one and exits"""

import sys

n = int(sys.stdin.readline().split()[1])
for _ in range(n):
    sys.stdin.readline()
sys.stdout.write('LABELS %d\n0\n' % n)
sys.stdout.flush()
