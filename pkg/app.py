import os

import click
from dotenv import load_dotenv

from commands.analyze import analyze
from commands.cc import cc_group
from commands.experiment import experiment_group
from commands.integrate import integrate_cmd
from commands.minimize import minimize_cmd
from commands.surgery import surgery_group
from extensions import configure_logging

load_dotenv()


@click.group()
@click.option("--log-level", envvar="BOLZA_LOG", default="WARNING", show_default=True)
def cli(log_level):
    """Fixed-ends action minimizers of the collinear N-body problem and their collisions."""
    configure_logging(log_level)


# Register command groups
cli.add_command(minimize_cmd)
cli.add_command(cc_group)
cli.add_command(analyze)
cli.add_command(surgery_group)
cli.add_command(integrate_cmd)
cli.add_command(experiment_group)


if __name__ == "__main__":
    os.makedirs(os.environ.get("BOLZA_OUT", "runs"), exist_ok=True)
    cli()
