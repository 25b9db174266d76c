"""Multilevel memory cell: recall error against read noise and level count.

A value in [0, 1] is split over four memristor branches, each holding one
digit of a mixed-radix code.  Read noise perturbs every branch, and the
recalled value is decoded digit by digit.  The bisection finds the largest
noise that keeps the mean error at 10% with 256 levels; the same noise with
1024 levels gives a larger error because each digit has finer steps.
"""

from memhtm import CALIBRATED_SIGMA_256, DevicePreset, calibrate_sigma, recall_error
from memhtm.device import branch_radices

preset = DevicePreset()
for levels in (256, 1024):
    print(f"{levels} levels over 4 branches -> radices {branch_radices(levels, 4)}")

print("\nsigma   err@256  err@1024")
for sigma in (0.0, 0.1, 0.2, 0.3, CALIBRATED_SIGMA_256, 0.5):
    e256 = recall_error(preset, 256, sigma, samples=4000)
    e1024 = recall_error(preset, 1024, sigma, samples=4000)
    print(f"{sigma:5.3f}   {e256:7.4f}  {e1024:8.4f}")

sigma = calibrate_sigma(0.10, samples=4000, tol=1e-3)
print(f"\nbisected noise for a 10% mean error at 256 levels: {sigma:.3f} "
      f"(the stored constant {CALIBRATED_SIGMA_256} was fitted on 20000 samples and keeps a small margin)")
