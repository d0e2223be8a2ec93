"""Command line front end, scene files and exporters."""

from .export import export_mesh, json_text, obj_text, project
from .main import build_parser, main, run
from .scene import Scene, load_scene, parse_scene, write_scene

__all__ = [
    "Scene",
    "build_parser",
    "export_mesh",
    "json_text",
    "load_scene",
    "main",
    "obj_text",
    "parse_scene",
    "project",
    "run",
    "write_scene",
]
