# Hover trim and the linear attitude model
# ========================================
#
# Solve the hover trim with the default vehicle, then look at the
# linearized attitude dynamics the inner loop is designed on.

# %%
import numpy as np

from helictl import find_trim, jacobians, load_params
from helictl.linearize import ATTITUDE_NAMES, INPUT_NAMES

heli, ctrl = load_params()
trim = find_trim(heli)
print(trim.summary())

# %% [markdown]
# The rotor thrust at trim sits slightly below the weight: the vehicle
# hangs with a small roll angle to balance the tail-rotor side force, so
# part of the lift is supplied by the tilted disk.

# %%
print(f"weight {heli.m * heli.g:.3f} N, thrust {trim.thrust:.3f} N")

# %%
model = jacobians(trim, heli, ctrl)
np.set_printoptions(precision=3, suppress=True, linewidth=120)
print("states:", ", ".join(ATTITUDE_NAMES))
print("inputs:", ", ".join(INPUT_NAMES))
print("A =\n", model.A)
print("B =\n", model.B)

# %% [markdown]
# The open-loop spectrum has three poles at the origin, the heading
# among them, so the attitude drifts without feedback.

# %%
for lam in sorted(np.linalg.eigvals(model.A), key=lambda z: z.real):
    print(f"{lam.real:9.4f} {lam.imag:+9.4f}j")
