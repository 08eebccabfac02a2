"""Print the code-verification studies: temporal order, WENO3 slope, conservation drift."""
import numpy as np

from frostrom.verification import conservation_drift, manufactured_temporal_study, weno_face_study


def main():
    mms = manufactured_temporal_study()
    print("BDF2-opt manufactured solution")
    for dt, err in zip(mms.steps, mms.errors):
        print(f"  dt={dt:<8g} max error={err:.3e}")
    print(f"  observed orders {np.round(mms.orders, 3).tolist()}")

    weno = weno_face_study()
    print("WENO3 face values of a smooth Gaussian")
    for h, err in zip(weno.steps, weno.errors):
        print(f"  h={h:<8g} L1 error={err:.3e}")
    print(f"  least-squares slope {weno.slope:.3f}")

    print(f"Insulated conservation drift over 100 steps: {conservation_drift():.2e}")


if __name__ == "__main__":
    main()
