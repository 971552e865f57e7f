#include "vadkd/checkpoint.hpp"

#include <map>

namespace vadkd {

using detail::put_f32;
using detail::put_u16;
using detail::put_u32;

void save_ckpt(const std::string& path, const std::vector<CkptEntry>& entries) {
    std::string out;
    out += "CKPT";
    put_u32(out, static_cast<uint32_t>(entries.size()));
    for (const auto& e : entries) {
        if (e.name.size() > 0xffff) throw IoError("ckpt: tensor name too long: " + e.name);
        put_u16(out, static_cast<uint16_t>(e.name.size()));
        out += e.name;
        if (e.shape.size() > 0xff) throw IoError("ckpt: tensor rank too large for " + e.name);
        out.push_back(static_cast<char>(e.shape.size()));
        int64_t numel = 1;
        for (int64_t d : e.shape) {
            put_u32(out, static_cast<uint32_t>(d));
            numel *= d;
        }
        if (static_cast<int64_t>(e.data.size()) != numel)
            throw IoError("ckpt: entry " + e.name + " has " + std::to_string(e.data.size()) +
                          " values for shape of " + std::to_string(numel));
        for (float v : e.data) put_f32(out, v);
    }
    detail::write_file(path, out, "ckpt");
}

std::vector<CkptEntry> load_ckpt(const std::string& path) {
    detail::ByteReader r{detail::read_file(path, "ckpt"), 0, path, "ckpt"};
    if (r.bytes(4, "magic") != "CKPT") throw MagicError("ckpt: bad magic in " + path);
    const uint32_t count = r.u32("tensor count");
    std::vector<CkptEntry> entries;
    entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CkptEntry e;
        const uint16_t name_len = r.u16("name length");
        e.name = r.bytes(name_len, "name");
        const uint8_t ndim = r.u8("ndim");
        int64_t numel = 1;
        for (int di = 0; di < ndim; ++di) {
            const uint32_t d = r.u32("dim");
            e.shape.push_back(static_cast<int64_t>(d));
            numel *= d;
        }
        e.data.resize(static_cast<size_t>(numel));
        for (int64_t vi = 0; vi < numel; ++vi) e.data[static_cast<size_t>(vi)] = r.f32("tensor data");
        entries.push_back(std::move(e));
    }
    return entries;
}

template <class T>
std::vector<CkptEntry> store_to_entries(const ParamStoreT<T>& store) {
    std::vector<CkptEntry> entries;
    entries.reserve(store.params.size() + store.buffers.size());
    for (const auto& [name, t] : store.params) {
        CkptEntry e;
        e.name = name;
        e.shape = t->shape;
        e.data.reserve(t->data.size());
        for (T v : t->data) e.data.push_back(static_cast<float>(v));
        entries.push_back(std::move(e));
    }
    for (const auto& [name, buf] : store.buffers) {
        CkptEntry e;
        e.name = name;
        e.shape = {static_cast<int64_t>(buf->size())};
        e.data.reserve(buf->size());
        for (T v : *buf) e.data.push_back(static_cast<float>(v));
        entries.push_back(std::move(e));
    }
    return entries;
}

template <class T>
void load_entries_into_store(const std::vector<CkptEntry>& entries, ParamStoreT<T>& store) {
    std::map<std::string, const CkptEntry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;
    size_t consumed = 0;
    for (const auto& [name, t] : store.params) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw IoError("ckpt: missing tensor " + name);
        const CkptEntry& e = *it->second;
        if (e.shape != t->shape) throw IoError("ckpt: shape mismatch for " + name);
        for (size_t i = 0; i < t->data.size(); ++i) t->data[i] = static_cast<T>(e.data[i]);
        ++consumed;
    }
    for (const auto& [name, buf] : store.buffers) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw IoError("ckpt: missing buffer " + name);
        const CkptEntry& e = *it->second;
        if (e.data.size() != buf->size()) throw IoError("ckpt: size mismatch for buffer " + name);
        for (size_t i = 0; i < buf->size(); ++i) (*buf)[i] = static_cast<T>(e.data[i]);
        ++consumed;
    }
    if (consumed != entries.size())
        throw IoError("ckpt: file holds " + std::to_string(entries.size()) + " tensors, model consumed " +
                      std::to_string(consumed));
}

template <class T>
void save_store(const std::string& path, const ParamStoreT<T>& store) {
    save_ckpt(path, store_to_entries(store));
}

template <class T>
void load_store(const std::string& path, ParamStoreT<T>& store) {
    load_entries_into_store(load_ckpt(path), store);
}

template std::vector<CkptEntry> store_to_entries<float>(const ParamStoreT<float>&);
template std::vector<CkptEntry> store_to_entries<double>(const ParamStoreT<double>&);
template void load_entries_into_store<float>(const std::vector<CkptEntry>&, ParamStoreT<float>&);
template void load_entries_into_store<double>(const std::vector<CkptEntry>&, ParamStoreT<double>&);
template void save_store<float>(const std::string&, const ParamStoreT<float>&);
template void save_store<double>(const std::string&, const ParamStoreT<double>&);
template void load_store<float>(const std::string&, ParamStoreT<float>&);
template void load_store<double>(const std::string&, ParamStoreT<double>&);

}  // namespace vadkd
