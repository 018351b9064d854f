"""Walk through the relative-geometry angles and the shaped reward.

Builds a handful of canonical engagements (tail chase, head-on, beam,
offset pursuit) and prints each one's aspect angle, antenna train angle,
range, reward components and win status from red's perspective.

Run:  python3 demos/geometry_and_rewards.py
"""

import math

from aircombat_adp import (
    AircraftState,
    CombatState,
    Perspective,
    RewardConfig,
    distance_angle_reward,
    is_dominated,
    relative_geometry,
    scaled_component_rewards,
    total_reward,
)


def craft(x, y, z, psi_deg, v=250.0):
    return AircraftState(v=v, x=x, y=y, z=z, theta=0.0, psi=math.radians(psi_deg))


SCENARIOS = [
    ("tail chase, 500 m (ideal)", craft(0, 0, 3000, 0), craft(0, 500, 3000, 0, v=204)),
    ("tail chase, 2 km", craft(0, 0, 3000, 0), craft(0, 2000, 3000, 0, v=204)),
    ("head-on pass", craft(0, 0, 3000, 0), craft(0, 1000, 3000, 180, v=204)),
    ("beam aspect", craft(0, 0, 3000, 0), craft(0, 1000, 3000, 90, v=204)),
    ("being chased", craft(0, 500, 3000, 0), craft(0, 0, 3000, 0, v=204)),
    ("offset pursuit, 30 deg", craft(0, 0, 2700, 30), craft(400, 900, 3000, 0, v=204)),
]


def main():
    cfg = RewardConfig()
    header = f"{'scenario':28s} {'aa':>7s} {'ata':>7s} {'range':>8s} " \
             f"{'R1':>6s} {'R2':>6s} {'R3':>6s} {'R':>7s}  win?"
    print(header)
    print("-" * len(header))
    for name, red, blue in SCENARIOS:
        cs = CombatState(red=red, blue=blue)
        g = relative_geometry(cs, Perspective.RED)
        r1, r2 = scaled_component_rewards(g, cfg)
        r3 = distance_angle_reward(g, cfg)
        r = total_reward(cs, Perspective.RED, cfg)
        win = "RED WIN" if is_dominated(cs, Perspective.RED, cfg) else ""
        print(
            f"{name:28s} {math.degrees(g.aa):6.1f}° {math.degrees(g.ata):6.1f}° "
            f"{g.range:7.0f}m {r1:6.2f} {r2:6.2f} {r3:6.2f} {r:7.3f}  {win}"
        )
    print()
    print("R3 peaks at the desired range r_d and decays with |range - r_d|;")
    print("R1/R2 are the clamped speed and height advantages; R is their mean.")


if __name__ == "__main__":
    main()
