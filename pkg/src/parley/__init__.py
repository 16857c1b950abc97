"""parley: a two-party negotiation arena.

Subpackages and modules:

* ``scenarios``    outcome space, utilities, feasibility, surplus/pie calculus
* ``protocol``     fixed-horizon turn protocol with an explicit deal handshake
* ``agents``       scripted negotiator bots and chat-provider-backed agents
* ``gateway``      chat-completions HTTP client plus a deterministic stub provider
* ``judges``       transcript judges for deception and reputation
* ``ratings``      skill ratings for continuous share differences (Gauss-Newton/IRLS)
* ``stats``        rank tests, effect sizes, FDR, bootstrap, fractional-logit GLM
* ``orchestrator`` experiment schedules, episode execution, metric extraction
* ``service``      HTTP session API for live human-vs-agent play
"""

__version__ = "0.1.0"
