"""Mixed time-scale weight sequences and the decay-rate oracle.

The consensus weight decays slower than the innovation weight, so
agreement dynamics dominate asymptotically.  A deterministic recursion
with the same structure predicts decay exponents; it doubles as a test
oracle for the rate fits used in the experiments.
"""

from adle.errors import ScheduleViolation
from adle.schedule import WeightSchedule, deterministic_recursion_oracle, validate_schedule

schedule = validate_schedule(WeightSchedule())
print("defaults:", schedule)
print(f"separation slack: {schedule.separation_slack:.3f} (must be positive)")
for t in (0, 10, 1000, 100_000):
    print(f"  t={t:>6}: alpha={schedule.alpha(t):.2e}  beta={schedule.beta(t):.2e}  "
          f"gamma={schedule.gamma(t):.2e}  beta/alpha={schedule.beta(t)/schedule.alpha(t):.1f}")

print("\nan inadmissible schedule is rejected with its slack:")
try:
    validate_schedule(WeightSchedule(tau1=1.0, tau2=0.6, eps1=2.0))
except ScheduleViolation as exc:
    print(" ", exc)

print("\ndecay oracle: z <- (1 - a1/(t+1)^d1) z + a2/(t+1)^d2, slope over the last decade")
for d1, d2 in ((0.0, 1.0), (0.2, 0.8), (0.5, 0.5)):
    slope = deterministic_recursion_oracle(d1, d2, 0.5, 1.0, horizon=10**6)
    regime = "bounded" if d1 == d2 else f"predicted -{d2 - d1:.1f}"
    print(f"  d1={d1}, d2={d2}: fitted slope {slope:+.3f}  ({regime})")
