"""pmx: an execution engine for partial hierarchical state-machine models.

Pipeline: parse -> analyze -> refine -> execute, with interactive or
rule-scripted steering at the decision points the refinement inserts.
"""

__version__ = "0.1.0"
