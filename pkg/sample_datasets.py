import argparse
import logging
import os

from channel_model import Basis, Intensity, Link, ObservedCounts, sample_statistics
from counts_io import CountsFile, write_counts
from protocol import TRANSMITTER, Purpose
from settings import load_config

logger = logging.getLogger(__name__)

N_PULSES = 2 * 10**12

# Detection and error counts of the field runs, per link:
# (n_Z_mu, m_Z_mu, n_Z_nu, m_Z_nu, n_X_mu, m_X_mu, n_X_nu, m_X_nu)
FIELD_RUNS = {
    103: {
        Link.BOB_ALICE: (4.17e9, 7.35e6, 4.05e7, 77579, 1.84e6, 1956, 19474, 68),
        Link.CHARLIE_ALICE: (4.03e9, 6.66e6, 4.09e7, 109820, 1.85e6, 2657, 19240, 34),
    },
    204: {
        Link.BOB_ALICE: (5.53e7, 165422, 4.22e6, 26223, 253975, 686, 18389, 104),
        Link.CHARLIE_ALICE: (5.21e7, 171233, 4.00e6, 25500, 254259, 675, 19636, 94),
    },
    280: {
        Link.BOB_ALICE: (2.04e6, 39090, 407033, 21908, 102804, 1831, 20279, 1209),
        Link.CHARLIE_ALICE: (2.05e6, 36028, 396024, 21838, 100303, 1854, 21236, 1086),
    },
}

_ORDER = [(b, i) for b in (Basis.Z, Basis.X) for i in (Intensity.SIGNAL, Intensity.DECOY)]


def field_run_counts(distance_km):
    """CountsFile of the field run at 103, 204 or 280 km."""
    counts = {}
    for link, row in FIELD_RUNS[distance_km].items():
        counts[link] = ObservedCounts.from_cells(
            {cell: (row[2 * j], row[2 * j + 1]) for j, cell in enumerate(_ORDER)}
        )
    return CountsFile(counts=counts, distance_km=float(distance_km), n_pulses=N_PULSES)


def main(simulate, seed, config):
    os.makedirs('sample_data', exist_ok=True)

    for distance in FIELD_RUNS:
        write_counts(f'sample_data/field_run_{distance}km.csv', field_run_counts(distance))

    if simulate:
        cfg = load_config(config)
        pc = cfg.pulse_config()
        for distance in simulate:
            ch = cfg.channel(distance)
            counts = {
                link: sample_statistics(pc, ch, seed=[seed, int(TRANSMITTER[link]), int(Purpose.CHANNEL)])
                for link in Link
            }
            path = f'sample_data/simulated_{distance:g}km_seed{seed}.csv'
            write_counts(path, CountsFile(counts=counts, distance_km=distance, n_pulses=pc.n_pulses))
            print(f"[SAVED] {path}")


if __name__ == '__main__':
    parser = argparse.ArgumentParser()
    parser.add_argument('--simulate', type=float, nargs='*', default=[], metavar='KM',
                        help='Also write sampled counts at these distances')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--config', default='sample_data/field_device.conf')
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="[%(levelname)s] %(name)s: %(message)s")
    main(args.simulate, args.seed, args.config)
