"""
Agents that drive benchmark runs
"""

from .pipeline_agent import PipelineAgent, load_run, resolve_target

__all__ = ['PipelineAgent', 'load_run', 'resolve_target']
