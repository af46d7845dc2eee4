"""
Scene-driven keyframe selection engine.

Pure functions over immutable values: timeline arithmetic, scene
segmentation, relevance fusion, frame budget allocation, reward shaping and
the needle simulation harness. Nothing in this package performs network I/O.
"""
