from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402


def score_histogram_plot(path, positives: Sequence[float], negatives: Sequence[float], title: str = '',
                         bins: int = 30) -> Path:
    """Overlaid positive / negative score histograms written to a static image file"""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    values = list(positives) + list(negatives)
    edges = bins
    if values:
        lo, hi = min(values), max(values)
        edges = [lo + (hi - lo or 1.0) * i / bins for i in range(bins + 1)]
    if positives:
        ax.hist(positives, bins=edges, alpha=0.6, color='tab:green', label=f'positive (n={len(positives)})')
    if negatives:
        ax.hist(negatives, bins=edges, alpha=0.6, color='tab:red', label=f'negative (n={len(negatives)})')
    ax.set_xlabel('ITM score')
    ax.set_ylabel('sentences')
    ax.set_title(title)
    if values:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
