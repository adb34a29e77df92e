import pytest

from afindex import cli
from afindex.demo import write_demo_inputs

PIPELINE = ("ingest", "backcast", "embed", "index", "analyze",
            "regress", "survey", "report")


def run_pipeline(config_path, workers=None):
    for command in PIPELINE:
        args = [command, "--config", str(config_path)]
        if workers is not None and command in ("embed", "index"):
            args += ["--workers", str(workers)]
        rc = cli.run(args)
        assert rc == 0, f"'{command}' exited with {rc}"


@pytest.fixture(scope="session")
def demo_project(tmp_path_factory):
    """The bundled synthetic project, generated and run end to end once."""
    root = tmp_path_factory.mktemp("demo_project")
    config_path = write_demo_inputs(root)
    run_pipeline(config_path)
    return root
