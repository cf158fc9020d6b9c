# Takeoff, heading change, gust and landing
# =========================================
#
# Fly the default mission: climb from a 0.20 m platform to 0.65 m, turn to
# 273.5 deg, hold for a minute with a 3 m/s side gust in the middle, then
# land.  Writes the log and the per-figure CSV bundles next to this file.

# %%
import time
from pathlib import Path

import numpy as np

from helictl import flight_metrics, load_params, paper_hover, prepare, run_scenario

heli, ctrl = load_params()
trim, model, gains = prepare(heli, ctrl)

t0 = time.perf_counter()
log = run_scenario(paper_hover(seed=42), heli, ctrl, gains, trim)
print(f"{log.status}: {len(log)} rows in {time.perf_counter() - t0:.1f} s")

# %%
m = flight_metrics(log, ctrl=ctrl)
print(f"hover RMS position error  {m.hover_rms * 100:.2f} cm")
print(f"settled heading error     {m.heading_error_deg:.3f} deg")
print(f"yaw overshoot             {m.yaw_overshoot:.2%}")
print(f"smallest envelope margin  {m.min_margin:.4f} m/s")

# %% [markdown]
# Position error around the gust.  The wind blows across the heading, so
# the deviation shows mostly in the horizontal plane.

# %%
t = log["t"]
gust = log["wind_n"] ** 2 + log["wind_e"] ** 2 > 0
t_on, t_off = t[gust][0], t[gust][-1]
err = np.hypot(log["x"] - log["x_ref"], log["y"] - log["y_ref"])
for label, mask in [("before", (t > t_on - 10) & (t < t_on)),
                    ("during", (t > t_on) & (t < t_off)),
                    ("after", (t > t_off) & (t < t_off + 10))]:
    print(f"{label:>6} gust: mean {err[mask].mean() * 100:5.2f} cm, "
          f"max {err[mask].max() * 100:5.2f} cm")

# %%
out = Path(__file__).with_name("flight")
out.mkdir(exist_ok=True)
log.to_csv(out / "log.csv")
print("wrote", ", ".join(log.write_figure_bundles(out)), "to", out)
