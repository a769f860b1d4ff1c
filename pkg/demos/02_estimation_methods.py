#!/usr/bin/env python3
"""The four background estimation methods on two stubborn scenes.

Scene A mimics a person standing still for the first 60% of the frames.
Every purely temporal per-pixel method fails there: the medoid votes for
the majority value, and the longest stable run IS the standing person.
Only the block method recovers the background, by preferring the
representative whose seams blend with the neighborhood.

Scene B keeps the same geometry but makes the foreground flicker.  Now the
foreground never forms a stable run, so the stability-based estimate
recovers the background while the medoid still fails.  The selective model
fails differently in both scenes: it initializes on frame 0, which shows
the occluder, and selectivity then blocks any update toward a background
it has never accepted.
"""

from pathlib import Path

from sbibench import (blockmrf_background, compute_all, generate,
                      median_background, save_image, sobs_background,
                      ws2006_background)
from sbibench.synth import Occluder, SceneScript

OUT = Path("demo_output/methods")
OUT.mkdir(parents=True, exist_ok=True)


def scene(name, color_mode, seed):
    return SceneScript(
        width=96, height=64, frames=120, seed=seed,
        background=("gradient",),
        occluders=(Occluder(rect=(10, 16, 20, 40), color_mode=color_mode,
                            active=(0, 71)),))  # present for the first 60%


def evaluate(tag, script):
    sequence, background = generate(script, name=tag)
    estimates = {
        "median": median_background(sequence),
        "ws2006": ws2006_background(sequence),
        "sobs": sobs_background(sequence),
        "blockmrf": blockmrf_background(sequence),
    }
    print(f"{'method':<10} {'AGE':>8} {'EPs':>6} {'pEPs':>9} {'PSNR':>8} {'MS-SSIM':>8}")
    for name, img in estimates.items():
        save_image(img, OUT / f"{tag}__{name}.png")
        r = compute_all(background, img)
        print(f"{name:<10} {r.age:8.4f} {r.eps:6d} {r.p_eps * 100:8.4f}% "
              f"{r.psnr:8.4f} {r.ms_ssim:8.4f}")
    print()


print("scene A: steady opaque occluder, 60% of the frames")
evaluate("steady", scene("steady", ("fixed", (205, 60, 50)), seed=7))

print("scene B: same geometry, flickering occluder")
evaluate("flicker", scene("flicker", ("flicker", 100, 255), seed=8))

print(f"images written to {OUT}/")
print("takeaways: per-pixel majority (median) fails in both scenes; the")
print("stability estimate needs the foreground to be unstable; the")
print("selective model needs the background visible when it initializes")
print("(frame 0 here shows the occluder); the block method resolves even")
print("the steady case through seam smoothness.")
