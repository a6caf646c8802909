from .cli import cli

cli(prog_name="curvature_twin")
