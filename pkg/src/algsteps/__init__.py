"""Operation embeddings for step-by-step equation solving.

Submodules:

- ``expr``: operator trees, parser/printer, exact evaluation, equivalence oracle
- ``generate``: synthetic solution-step generator and step-validity oracle
- ``tensor`` / ``optim`` / ``gradcheck`` / ``checkpoint``: reverse-mode autodiff
  tape on numpy arrays, Adam, finite-difference checking, parameter persistence
- ``encoders``: tree and character expression encoders plus the shared adapter
- ``models``: softmax and translation-based (TransE/TransR) operation models
- ``data``: step records, TSV input/output, splits and folds
- ``experiments``: cross-validation, cross-distribution, fine-tuning, feedback,
  and operation-geometry runners
- ``annotate`` / ``cli`` / ``server``: transcript annotation, command line, HTTP API
"""

__version__ = "0.1.0"
