"""Controller synthesis and simulation for electromagnetic soft actuator networks.

Thin re-export of the compiled core: model assembly, certificate solves,
relaxation, selection recovery, exact branch-and-bound, closed-loop
simulation, and the scenario runner.
"""

from esactrl._core import *  # noqa: F401,F403
from esactrl._core import __doc__ as _core_doc

__doc__ = _core_doc
