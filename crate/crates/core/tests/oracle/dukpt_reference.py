#!/usr/bin/env python3
"""Independent DUKPT reference used to freeze the interop values in the test suite.

Built on OpenSSL (via the `cryptography` package) and written without reference to
the Rust implementation. Run it to regenerate the pinned values:

    python3 crates/core/tests/oracle/dukpt_reference.py
"""
import warnings

warnings.filterwarnings("ignore")

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

MASK_C0 = bytes.fromhex("C0C0C0C000000000C0C0C0C000000000")
PIN_MASK = bytes.fromhex("00000000000000FF00000000000000FF")
DATA_MASK = bytes.fromhex("0000000000FF00000000000000FF0000")


def xor(a, b):
    return bytes(x ^ y for x, y in zip(a, b))


def ecb(key, block, decrypt=False):
    if len(key) == 8:
        key = key * 3
    elif len(key) == 16:
        key = key + key[:8]
    c = Cipher(algorithms.TripleDES(key), modes.ECB())
    op = c.decryptor() if decrypt else c.encryptor()
    return op.update(block) + op.finalize()


def cbc(key, data):
    c = Cipher(algorithms.TripleDES(key + key[:8]), modes.CBC(bytes(8)))
    op = c.encryptor()
    return op.update(data) + op.finalize()


def ipek(bdk, ksn):
    base = int.from_bytes(ksn, "big") & ~0x1FFFFF
    top = base.to_bytes(10, "big")[:8]
    return ecb(bdk, top) + ecb(xor(bdk, MASK_C0), top)


def nrkgp(key, ksn_low8):
    def half(k):
        r = xor(ksn_low8, k[8:])
        r = ecb(k[:8], r)
        return xor(r, k[8:])

    return half(xor(key, MASK_C0)) + half(key)


def transaction_key(bdk, ksn):
    value = int.from_bytes(ksn, "big")
    counter = value & 0x1FFFFF
    key = ipek(bdk, ksn)
    reg = value & ~0x1FFFFF
    bit = 1 << 20
    while bit:
        if counter & bit:
            reg |= bit
            key = nrkgp(key, reg.to_bytes(10, "big")[2:])
        bit >>= 1
    return key


def pad(data):
    data = data + b"\x80"
    while len(data) % 8:
        data += b"\x00"
    return data


def vector_file():
    bdk = bytes.fromhex("0123456789ABCDEFFEDCBA9876543210")
    ksn0 = bytes.fromhex("FFFF9876543210E00000")
    clear_pin = xor(bytes.fromhex("041234FFFFFFFFFF"), bytes.fromhex("0000401234567890"))
    data = b"4012345678909=2512"
    lines = ["# Interop vectors from the independent reference (dukpt_reference.py --vectors)"]
    for counter in (1, 2, 3, 4, 5, 0x10, 0x3FF, 0x400, 0x1FF800):
        ksn = (int.from_bytes(ksn0, "big") | counter).to_bytes(10, "big")
        tk = transaction_key(bdk, ksn)
        pin_key = xor(tk, PIN_MASK)
        data_key = xor(tk, DATA_MASK)
        fields = [
            ("bdk", bdk.hex()),
            ("ksn", ksn0.hex()),
            ("counter", f"{counter:06x}"),
            ("transaction_key", tk.hex()),
            ("pin_key", pin_key.hex()),
            ("data_key", data_key.hex()),
            ("pin_block", clear_pin.hex()),
            ("pin_ciphertext", ecb(pin_key, clear_pin).hex()),
            ("data", data.hex()),
            ("data_ciphertext", cbc(data_key, pad(data)).hex()),
        ]
        lines.append(" ".join(f"{k}={v.upper()}" for k, v in fields))
    return "\n".join(lines) + "\n"


def main():
    import sys

    if "--vectors" in sys.argv:
        sys.stdout.write(vector_file())
        return
    bdk = bytes.fromhex("0123456789ABCDEFFEDCBA9876543210")
    ksn0 = bytes.fromhex("FFFF9876543210E00000")
    print("ipek", ipek(bdk, ksn0).hex().upper())
    clear_pin = xor(bytes.fromhex("041234FFFFFFFFFF"), bytes.fromhex("0000401234567890"))
    print("iso0", clear_pin.hex().upper())
    for counter in (1, 2, 3, 0x400, 0x1FF800):
        ksn = (int.from_bytes(ksn0, "big") | counter).to_bytes(10, "big")
        tk = transaction_key(bdk, ksn)
        pin_key = xor(tk, PIN_MASK)
        data_key = xor(tk, DATA_MASK)
        print(
            f"counter={counter:06X} tk={tk.hex().upper()} pin={pin_key.hex().upper()} "
            f"data={data_key.hex().upper()} "
            f"epb={ecb(pin_key, clear_pin).hex().upper()} "
            f"edata={cbc(data_key, pad(b'4012345678909=2512')).hex().upper()}"
        )


if __name__ == "__main__":
    main()
