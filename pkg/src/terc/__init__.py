"""TERC: selecting the state variables an agent's actions actually depend on.

The Transfer Entropy Redundancy Criterion keeps a variable when dropping it
from the state set raises the conditional entropy of the recorded actions.
"""

__version__ = "0.1.0"
