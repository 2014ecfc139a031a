"""tcsaug: pairwise topic-controlled augmentation datasets and win-rate evaluation.

Pipeline stages: ingest an abstract/summary corpus, attach one salient topic
per pair (Wikifier service or offline fallback), build seeded pairwise
augmentation datasets (baseline / kX / XX), and score generated summaries
with a contrastive cosine win-rate metric.
"""

__version__ = "0.1.0"
