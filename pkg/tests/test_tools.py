"""Tests for the MCP tool surface."""
import pytest

from soft_label_loc import server
from soft_label_loc.config import load_config, run_directory


def _text(result) -> str:
    """Join text content from call_tool, whichever result shape the mcp version returns."""
    if isinstance(result, tuple):
        result = result[0]
    return "".join(getattr(block, "text", "") for block in result)


class TestCodebookTools:
    """Test the stateless tools."""

    def test_describe_sslc(self):
        """Test the SSLC summary reports sigma and diagonal mass."""
        text = server.describe_codebook(kind="SSLC", length=6.0, width=6.0, rows=8, cols=8, alpha_s=2.8)
        assert "sigma" in text
        assert "Mass kept on the true area" in text
        assert "area 1:" in text

    def test_low_alpha_warns(self):
        """Test a soft SSLC warns that the true area keeps little mass."""
        text = server.describe_codebook(kind="SSLC", alpha_s=2.2)
        assert "⚠️" in text

    def test_unknown_kind(self):
        """Test an unknown codebook kind."""
        assert server.describe_codebook(kind="TRIANGLE").startswith("❌")

    def test_errors_become_text(self):
        """Test invalid arguments come back as an error message."""
        text = server.describe_codebook(kind="SMOOTHED", epsilon=1.5)
        assert text.startswith("❌ InvalidConfigurationError")

    def test_quantization_bound(self):
        """Test square cells also report the closed form."""
        text = server.quantization_bound(length=8.0, width=8.0, rows=8, cols=8, samples=20_000)
        assert "UB-MAE" in text
        assert "0.3826" in text

    def test_guide(self):
        """Test the prompt names the standard strategies."""
        guide = server.label_coding_guide()
        assert "DSLC_SSLC_ADAPTIVE" in guide
        assert "alpha_s" in guide


class TestExperimentTools:
    """Test tools that drive experiments from a config file."""

    def test_simulate_train_evaluate(self, config_file):
        """Test the tool chain produces reports."""
        assert server.simulate_datasets(str(config_file)).startswith("✅")
        assert "Trained DSLC_SSLC_CONST for 2 epochs" in server.train_model(str(config_file))
        report = server.evaluate_model(str(config_file))
        assert "average" in report
        out_dir = run_directory(load_config(config_file)) / "DSLC_SSLC_CONST"
        assert (out_dir / "report.json").exists()

    def test_train_without_data(self, config_file):
        """Test a missing dataset is reported, not raised."""
        assert server.train_model(str(config_file)).startswith("❌ FormatError")

    def test_missing_config(self, tmp_path):
        """Test a missing config file is reported."""
        assert server.simulate_datasets(str(tmp_path / "nope.yaml")).startswith("❌ ConfigError")


class TestServerProtocol:
    """Test the tools through FastMCP."""

    @pytest.mark.asyncio
    async def test_tools_registered(self):
        """Test every tool is listed."""
        names = {tool.name for tool in await server.mcp.list_tools()}
        assert {
            "describe_codebook",
            "quantization_bound",
            "simulate_datasets",
            "train_model",
            "evaluate_model",
            "sweep_hyperparameter",
            "compare_strategies",
        } <= names

    @pytest.mark.asyncio
    async def test_call_tool(self):
        """Test a tool call returns its text report."""
        result = await server.mcp.call_tool("quantization_bound", {"length": 4.0, "width": 4.0, "rows": 4, "cols": 4, "samples": 1000})
        assert "UB-MAE" in _text(result)
