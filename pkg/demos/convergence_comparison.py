"""End-to-end: scalar baselines vs smoothness-aware methods on one dataset.

Runs the four method/compressor pairings on a heterogeneous logistic
split and prints bits-to-accuracy. The +-methods pay a one-time factor
upload and then send far fewer bits per round at the same contraction.
Artifacts (CSVs, SVG plots, summary.json) land in demos_out/.
"""

from pathlib import Path

import smoothquant as sq

out = Path(__file__).resolve().parent / "demos_out"
config = sq.ExperimentConfig(
    dataset="synthetic:logistic:300x20:seed=11:skew=2.0",
    n=6,
    l2=1e-2,
    methods=["dcgd", "dcgd+", "diana", "diana+"],
    compressors=["quant(s=1)", "quant+(beta=5)"],
    seeds=[0, 1],
    iterations=3000,
    output_dir=str(out),
)

summary = sq.run_experiment(config)
print(sq.format_summary(summary))

print("\nreading the table:")
print(" - dcgd rows stall before 1e-4: plain compressed GD hits the noise floor")
print(" - diana rows keep contracting: shift learning removes the floor")
print(" - + rows take larger safe stepsizes (certificates against the true")
print("   factors beat the scalar envelope), so they reach each accuracy in")
print("   fewer rounds and megabytes, one-time factor upload included")
print(f"\nplots: {out / 'plot_iters.svg'} and {out / 'plot_mbytes.svg'}")
