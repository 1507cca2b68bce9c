#ifndef MTGP_JSON_UTIL_HPP
#define MTGP_JSON_UTIL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mtgp/errors.hpp"

namespace mtgp::json_util {

using nlohmann::json;

/// Rejects any key of `j` that is not listed in `allowed`.
inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || item.key() == a;
        if (!ok) throw ConfigError(where + ": unknown field '" + item.key() + "'");
    }
}

/// Reads `j[key]` as T, wrapping type errors with the field path.
template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + "." + key + ": missing required field");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    return get<T>(j, key, where);
}

inline json to_array(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index k = 0; k < m.cols(); ++k) r[static_cast<std::size_t>(k)] = m(i, k);
        rows.push_back(r);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of rows");
    const auto n = static_cast<Eigen::Index>(j.size());
    const Eigen::Index d = n ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d)
            throw ConfigError(where + ": ragged matrix");
        for (Eigen::Index k = 0; k < d; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
    return m;
}

/// 64-bit FNV-1a; used to fingerprint canonical JSON dumps.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int k = 15; k >= 0; --k, v >>= 4) out[static_cast<std::size_t>(k)] = digits[v & 0xF];
    return out;
}

/// Hash of the canonical (key-sorted, compact) dump.
inline std::string config_hash(const json& j) { return hex64(fnv1a(j.dump())); }

}  // namespace mtgp::json_util

#endif  // MTGP_JSON_UTIL_HPP
