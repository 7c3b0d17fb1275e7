"""HTTP adapter exposing embedding, chat, and video models over the
four-route protocol consumed by the musevid pipeline.

The adapter is a standalone service: it shares the wire schemas with the
pipeline but imports nothing from it.  Engines are swappable per route, so
the same process can serve deterministic desk-scale engines or real models.
"""

__version__ = "0.1.0"
