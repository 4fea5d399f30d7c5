"""Rate thresholds across channels: the data behind the rate figures.

Walks the infection-density axis for two symmetric channels (1% and 10%
noise) and two Z-channels, computing for each point the capacity constant
c_Sh, the exact-recovery constant c_ex with its optimal test density d,
and the DD constant.  Plotted as 1/c these are nats of information per
test.  Three things to look for in the output:

* even 1% noise costs a large fraction of the noiseless rate;
* the optimal density d drifts away from log 2 as theta grows, first for
  the heavier-noise channels (choosing the design depends on the noise);
* on an initial theta range the exact-recovery rate at 10% noise beats
  the DD rate at 1% noise.
"""

import csv
import math
import pathlib

from noisygt.channel import parse_channel, shannon_constant
from noisygt.rates import c_dd, c_exact

THETAS = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
CHANNELS = ["bsc:0.01", "bsc:0.1", "z:0.9", "z:0.5"]
OUT = pathlib.Path(__file__).with_name("rate_thresholds.csv")


def main():
    rows = []
    for spec in CHANNELS:
        ch = parse_channel(spec)
        c_sh = shannon_constant(ch)
        print(f"\n{spec}:  capacity rate 1/c_Sh = {1 / c_sh:.4f} nats/test")
        print(f"  {'theta':>6} {'rate_ex':>9} {'d_opt':>7} {'rate_dd':>9}")
        for theta in THETAS:
            cex, dopt = c_exact(theta, ch)
            sol = c_dd(theta, ch)
            rows.append([spec, theta, c_sh, cex, dopt, sol.c_dd,
                         1 / cex, 1 / sol.c_dd, 1 / c_sh])
            print(f"  {theta:>6.2f} {1 / cex:>9.4f} {dopt:>7.3f} {1 / sol.c_dd:>9.4f}")

    with OUT.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel", "theta", "c_sh", "c_ex", "d_opt", "c_dd",
                    "rate_ex", "rate_dd", "rate_sh"])
        w.writerows(rows)
    print(f"\nwrote {OUT}")

    # the headline comparison: 10%-noise exact recovery vs 1%-noise DD
    print("\nexact recovery at 10% noise vs DD at 1% noise:")
    ten = {r[1]: r[3] for r in rows if r[0] == "bsc:0.1"}
    one = {r[1]: r[5] for r in rows if r[0] == "bsc:0.01"}
    for theta in THETAS:
        mark = "  <-- fewer tests than DD at 1%" if ten[theta] < one[theta] else ""
        print(f"  theta={theta:.2f}: c_ex(10%)={ten[theta]:8.3f} "
              f"c_DD(1%)={one[theta]:8.3f}{mark}")
    print(f"\nnoiseless reference: rate log(2) = {math.log(2):.4f} nats/test")


if __name__ == "__main__":
    main()
