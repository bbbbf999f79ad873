"""
Channel correlation against delay
=================================

The TDCP metric is the normalized correlation amplitude between two channel
snapshots. For a Jakes channel it follows |J0(2 pi fD dt)|; for a clustered
channel it also depends on where the UE is heading.
"""

import numpy as np

from tdcp import (AntennaArray, Delay, Numerology, TapProfile, TrsConfig, VelocityVector, cdl_a,
                  corr_amplitude, doppler_spread_from_corr, jakes_autocorr_reference, make_cdl, make_tdl)
from tdcp.trs import subcarrier_frequencies

num = Numerology()
trs = TrsConfig(bandwidth_prbs=52)
freqs = subcarrier_frequencies(trs.subcarriers(), trs.num_subcarriers, num)
delays = np.array([Delay.slots(n).seconds(num) for n in (1, 2, 3, 4, 5, 6, 10)])

# A TDL channel at 100 Hz maximum Doppler, many equal-power taps so the
# frequency average behaves like an ensemble average
fd = 100.0
profile = TapProfile.equal_power(256, 1 / (12 * 30e3 * 52))
amps = []
for seed in range(40):
    h = make_tdl(profile, fd, 64, seed, num_rx=2).response(np.r_[0.0, delays], freqs)[..., 0]
    amps.append([corr_amplitude(h[0], hk) for hk in h[1:]])
amps = np.mean(amps, axis=0)

print("delay [ms]  simulated  |J0|")
for dt, a in zip(delays, amps):
    print(f"{dt * 1e3:9.2f}  {a:9.4f}  {jakes_autocorr_reference(fd, dt):.4f}")

# Short delays give back the Doppler spread: fD / sqrt(2) for the Jakes spectrum
est = doppler_spread_from_corr(amps[0], delays[0]).f_d
print(f"\nDoppler from 1 slot: {est:.1f} Hz (fD / sqrt(2) = {fd / np.sqrt(2):.1f} Hz)")

# CDL-A at 10 km/h: two travel directions 90 deg apart. The curves separate
# as the delay grows, which a speed-only estimate cannot see.
long_delays = np.arange(1, 21) * 0.5e-3
print("\ndelay [ms]  azimuth 0  azimuth 90")
curves = {}
for az in (0.0, 90.0):
    c = []
    for seed in range(20):
        s = make_cdl(cdl_a(), 100e-9, 45.0, 10.0, AntennaArray.base_station(), AntennaArray.ue(),
                     VelocityVector.from_kmh(10.0, az), 3.5e9, seed).through()
        h = s.response(np.r_[0.0, long_delays], freqs)[..., 0]
        c.append([corr_amplitude(h[0], hk) for hk in h[1:]])
    curves[az] = np.mean(c, axis=0)
for k in range(1, len(long_delays), 3):
    print(f"{long_delays[k] * 1e3:9.1f}  {curves[0.0][k]:9.4f}  {curves[90.0][k]:9.4f}")
