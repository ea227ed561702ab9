"""Token bucket dynamics and the admissible-schedule set.

The network grants one token per step (g=1) up to a cap of ten (b=10); each
transmission of a control update costs three tokens (c=3).  On top of that,
the controller promises that actuator updates are never more than H steps
apart.  This script shows how the two constraints interact.
"""

from rolltube import Schedule, TokenBucket, bucket_step, bucket_trajectory, \
    enumerate_feasible_schedules, in_schedule_set

G, C, B = 1, 3, 10

# A transmission costs c tokens net of the per-step gain.
bucket = TokenBucket(g=G, c=C, b=B, level=10)
print("level after transmitting from a full bucket:", bucket_step(bucket, 1))
print("level after idling at the cap:", bucket_step(bucket, 0))
print("raw level when overspending (negative flags the violation):",
      bucket_step(TokenBucket(g=G, c=C, b=B, level=1), 1))

# Trajectories make the affordability of a whole schedule explicit.
for beta0, bits in [(10, "111"), (0, "100"), (2, "100")]:
    levels, ok = bucket_trajectory(beta0, Schedule.from_string(bits), G, C, B)
    print(f"beta0={beta0} schedule={bits}: levels={levels} feasible={ok}")

# The window constraint: first transmission within H-s-1 steps, gaps <= H,
# at most H trailing steps; short schedules may stay silent.
print("\nwindow constraint examples (H=3):")
for bits, s in [("000", 0), ("001010", 0), ("0001", 1), ("1111", 2)]:
    sched = Schedule.from_string(bits)
    print(f"  {bits} with counter s={s}:", in_schedule_set(sched, 3, s))

# Putting both together: everything of length 4 that the window with H=3
# admits and a half-full bucket can pay for.
print("\nfeasible length-4 schedules (H=3, s=0, beta0=5):")
for sched in enumerate_feasible_schedules(4, 3, 0, 5, G, C, B):
    print(" ", sched)

# With H=1 the window forces a transmission every single step.
print("\nfeasible length-3 schedules at H=1:",
      [str(s) for s in enumerate_feasible_schedules(3, 1, 0, 10, G, C, B)])
