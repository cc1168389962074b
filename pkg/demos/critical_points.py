"""Critical points for the log-series prior (q = 1) with record-type trials.

Prints alpha, beta, gamma, delta and rho for k in {1..5, 10}, plus the
gaps between beta_k and alpha_{k+1}.  Runs in a few seconds.
"""
from lastsuccess import value


def main():
    rows = value.table1()
    print(f"{'k':>3} {'alpha':>9} {'beta':>9} {'gamma':>9} {'delta':>9} {'rho':>9}")
    for r in rows:
        print(f"{r.k:>3} {r.alpha:9.6f} {r.beta:9.6f} {r.gamma:9.6f} {r.delta:9.6f} {r.rho:9.6f}")
    # beta_k sits exactly on alpha_{k+1}
    for a, b in zip(rows, rows[1:5]):
        print(f"beta_{a.k} - alpha_{b.k} = {a.beta - b.alpha:+.1e}")


if __name__ == "__main__":
    main()
