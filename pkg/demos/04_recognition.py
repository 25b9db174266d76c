"""End-to-end recognition on the synthetic suite, ideal against memristive.

Writes the 10-class suite to a temporary folder, then trains class templates
on half of each class and classifies the other half.  The memristive run
reads every block product from a noisy crossbar and keeps every template
accumulator in multilevel memory cells.  A small sweep over read noise shows
where accuracy starts to fall.
"""

import tempfile

from memhtm import ExperimentSpec, generate_dataset, run_experiment, run_sweep

with tempfile.TemporaryDirectory() as tmp:
    data = str(generate_dataset(tmp, n_classes=10, per_class=40, size=16, noise=0.05, seed=42))
    base = ExperimentSpec(dataset=data, seed=42, threads=4)

    for spec in (base, base.replace(backend="memristive", preset="multilevel256")):
        report, timings = run_experiment(spec)
        print(f"{spec.backend:10s} accuracy {report['accuracy']:.3f}  "
              f"sdr density {report['sdr_density']['mean']:.3f}  "
              f"encode {timings['encode']:.1f} s")

    cost = report["cost"]
    print(f"hardware estimate: {cost['area_um2']:.1f} um^2, {cost['power_uw']:.1f} uW for {cost['counts']}")

    spec = base.replace(backend="memristive", preset="multilevel256")
    summary, _ = run_sweep(spec, [("sigma_r", ["0.0", "0.4", "0.8", "1.2"])], workers=2)
    for point in summary["points"]:
        print(f"sigma_r = {point['settings']['sigma_r']:4s} accuracy {point['accuracy']:.3f}")
