#!/usr/bin/env python3
"""Scene scripting: reproducible synthetic sequences with exact ground truth.

Shows the script text format, analytic occupancy maps, and bit-exact
reproducibility of the renderer.
"""

import numpy as np

from sbibench import generate, occupancy_map
from sbibench.synth import format_scene_script, load_scene_script
from pathlib import Path

SCRIPT = """\
[scene]
width = 48
height = 32
frames = 60
seed = 2024
background = texture
noise_sigma = 2.0

[occluder]
rect = 4,8,12,16
color = fixed:220,50,50
active = 0,35

[occluder]
rect = 30,6,10,10
color = flicker:80,255
active = 10,59
velocity = 0.25,0.25
"""

path = Path("demo_output") / "scene.txt"
path.parent.mkdir(parents=True, exist_ok=True)
path.write_text(SCRIPT)

script = load_scene_script(path)
print("parsed scene:", script.width, "x", script.height, "/", script.frames, "frames,",
      len(script.occluders), "occluders")
print("round-trips through the text format:",
      load_scene_script(path) == load_scene_script(path))
assert format_scene_script(script).count("[occluder]") == 2

# occupancy is computed from the geometry alone, no rendering involved
occ = occupancy_map(script)
print("\nper-pixel occlusion fraction (quantized to tenths):")
for row in occ[::4, ::4]:
    print("  " + "".join(str(min(int(v * 10), 9)) for v in row))

seq_a, bg_a = generate(script)
seq_b, bg_b = generate(script)
print("\ntwo renders bit-identical:",
      np.array_equal(seq_a.frames, seq_b.frames) and np.array_equal(bg_a, bg_b))

# the true background never contains occluders or noise
flat = occ == 0.0
noise_free = generate(load_scene_script(path))[1]
print("background free of occluder colors:",
      not (noise_free[~flat] == (220, 50, 50)).all(axis=-1).any())
