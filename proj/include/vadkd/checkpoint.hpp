#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vadkd/io_common.hpp"
#include "vadkd/nn.hpp"

namespace vadkd {

// CKPT: magic "CKPT", u32-le tensor count, then per tensor
//   u16-le name length, name bytes, u8 ndim, ndim x u32-le dims,
//   f32-le row-major data.
struct CkptEntry {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<float> data;
};

void save_ckpt(const std::string& path, const std::vector<CkptEntry>& entries);
std::vector<CkptEntry> load_ckpt(const std::string& path);

// Store <-> entry conversion. Data is stored as f32 regardless of the build's
// compute precision; parameters and named buffers both land in the file.
template <class T>
std::vector<CkptEntry> store_to_entries(const ParamStoreT<T>& store);

// Strict by default: every store parameter/buffer must be present with a
// matching shape, and every file entry must be consumed.
template <class T>
void load_entries_into_store(const std::vector<CkptEntry>& entries, ParamStoreT<T>& store);

template <class T>
void save_store(const std::string& path, const ParamStoreT<T>& store);

template <class T>
void load_store(const std::string& path, ParamStoreT<T>& store);

}  // namespace vadkd
