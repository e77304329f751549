import pytest

from iemi_lidar.config_io import data_path, load_ini, load_many
from iemi_lidar.errors import ConfigurationError
from iemi_lidar.lidar import LidarConfig


@pytest.mark.parametrize("name", ["vlp16.ini", "demo_scene.ini", "channel.ini", "profile_interference.ini",
                                  "profile_saturation.ini", "profile_temperature.ini", "profile_encoder.ini",
                                  "profile_injection.ini"])
def test_bundled_files_load(name):
    load_ini(data_path(name))


def test_bundled_values():
    bundle = load_many([data_path("vlp16.ini"), data_path("demo_scene.ini"), data_path("channel.ini"),
                        data_path("profile_encoder.ini")])
    assert bundle.lidar == LidarConfig()
    assert len(bundle.scene.primitives) == 5
    assert bundle.channel.gain("encoder_line", 1060e6) == pytest.approx(1.0)
    assert bundle.emi.carrier_freq == 1060e6 and bundle.emi.initial_phase is None


def write(tmp_path, text):
    path = tmp_path / "c.ini"
    path.write_text(text)
    return path


@pytest.mark.parametrize("text", [
    "[lidar]\nrpmm = 600\n",
    "[mystery]\nx = 1\n",
    "[plane ground]\nnormal = 0,0,1\noffset = x\n",
    "[resonance r]\ncenter = 1e9\nwidth = 1e7\n",
    "[emi]\ncarrier_freq = 1e9\nbaseband = foo\n",
    "[lidar]\nrpm = -5\n",
    "not an ini file",
])
def test_bad_files(tmp_path, text):
    with pytest.raises(ConfigurationError):
        load_ini(write(tmp_path, text))


def test_later_files_override(tmp_path):
    a = write(tmp_path, "[lidar]\nrpm = 300\n")
    b = tmp_path / "b.ini"
    b.write_text("[fdd]\ndebounce = 5\n")
    bundle = load_many([data_path("vlp16.ini"), a, b])
    assert bundle.lidar.rpm == 300 and bundle.debounce == 5
