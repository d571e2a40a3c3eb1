"""Three-condition runs on the bundled Veteran and LUNG tables."""
import numpy as np

from _common import parser, save
from ksexplain.experiments import ExperimentConfig, run_three_condition

args = parser(__doc__).parse_args()
for dataset in ("veteran", "lung"):
    for model in ("cox", "rsf"):
        means = []
        for seed in range(args.seeds):
            r = run_three_condition(ExperimentConfig(kind="real", model=model, dataset=dataset, seed=seed,
                                                     n_jobs=args.n_jobs))
            save(r, args.out, f"{dataset}-{model}")
            means.append([r.aggregates[f"MRSE_E{i}"] for i in (1, 2, 3)])
        e1, e2, e3 = np.mean(means, axis=0)
        print(f"{dataset} {model}: MRSE E1={e1:.4f} E2={e2:.4f} E3={e3:.4f}")
