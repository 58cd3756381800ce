//! C ABI for the mqcm solver. See `include/mqcm.h`.
