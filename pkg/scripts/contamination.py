"""S1..S4 contamination table for both black boxes and both data sizes."""
import numpy as np

from _common import parser, save
from ksexplain.experiments import ExperimentConfig, run_contamination

p = parser(__doc__)
p.add_argument("--test-n", type=int, default=100)
args = p.parse_args()
cells = {}
for seed in range(args.seeds):
    r = run_contamination(ExperimentConfig(kind="contamination", seed=seed, test_n=args.test_n, n_jobs=args.n_jobs))
    save(r, args.out, "contamination")
    for c in r.aggregates["table"]:
        cells.setdefault((c["dataset"], c["model"]), []).append([c[f"S{i}"] for i in range(1, 5)])
for (size, model), vals in cells.items():
    s = np.mean(vals, axis=0)
    print(f"{size:5s} {model:3s}  S1={s[0]:.4f} S2={s[1]:.4f} S3={s[2]:.4f} S4={s[3]:.4f}")
