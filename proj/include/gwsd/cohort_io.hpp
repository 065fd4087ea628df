#pragma once

// On-disk cohort exchange format. Genotypes go to a small binary file:
//   bytes 0-4  magic "GWSC1"
//   u32 LE     n_subjects
//   u32 LE     n_markers
//   u8[n*m]    dosage matrix, row-major, values 0..2
// Phenotype (and exposure, if simulated) go to a sidecar table so they
// stay human-readable.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "gwsd/cohort.hpp"
#include "gwsd/csv.hpp"
#include "gwsd/errors.hpp"

namespace gwsd {

inline constexpr char cohort_magic[5] = {'G', 'W', 'S', 'C', '1'};

struct DosageMatrix {
    std::uint32_t n_subjects = 0;
    std::uint32_t n_markers = 0;
    std::vector<std::uint8_t> dosage; // row-major
};

namespace detail {
inline void put_u32_le(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 24) & 0xff));
}
} // namespace detail

inline std::string encode_cohort(const SimulatedCohort& c) {
    std::string out;
    const std::size_t n = static_cast<std::size_t>(c.n_subjects());
    const std::size_t m = static_cast<std::size_t>(c.n_markers);
    out.reserve(13 + n * m);
    out.append(cohort_magic, 5);
    detail::put_u32_le(out, static_cast<std::uint32_t>(n));
    detail::put_u32_le(out, static_cast<std::uint32_t>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            out.push_back(static_cast<char>(c.marker_dosage(
                static_cast<std::int64_t>(i), static_cast<std::int64_t>(j))));
    return out;
}

inline void write_cohort(const SimulatedCohort& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw validation_error("cannot open cohort file for writing: " + path);
    const std::string blob = encode_cohort(c);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out)
        throw validation_error("failed writing cohort file: " + path);
}

inline DosageMatrix read_cohort(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw validation_error("cannot open cohort file: " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || !std::equal(magic, magic + 5, cohort_magic))
        throw validation_error("not a cohort file (bad magic): " + path);
    unsigned char dim[8];
    in.read(reinterpret_cast<char*>(dim), 8);
    if (!in)
        throw validation_error("truncated cohort header: " + path);
    DosageMatrix d;
    d.n_subjects = static_cast<std::uint32_t>(dim[0]) |
                   (static_cast<std::uint32_t>(dim[1]) << 8) |
                   (static_cast<std::uint32_t>(dim[2]) << 16) |
                   (static_cast<std::uint32_t>(dim[3]) << 24);
    d.n_markers = static_cast<std::uint32_t>(dim[4]) |
                  (static_cast<std::uint32_t>(dim[5]) << 8) |
                  (static_cast<std::uint32_t>(dim[6]) << 16) |
                  (static_cast<std::uint32_t>(dim[7]) << 24);
    const std::size_t total =
        static_cast<std::size_t>(d.n_subjects) * d.n_markers;
    d.dosage.resize(total);
    in.read(reinterpret_cast<char*>(d.dosage.data()),
            static_cast<std::streamsize>(total));
    if (static_cast<std::size_t>(in.gcount()) != total)
        throw validation_error("truncated cohort body: " + path);
    for (const std::uint8_t v : d.dosage)
        if (v > 2)
            throw validation_error("cohort file has dosage outside 0..2: " + path);
    return d;
}

inline void write_phenotypes(const SimulatedCohort& c, const std::string& path,
                             TableFormat format = TableFormat::csv) {
    TableWriter w(format);
    if (c.has_exposure()) {
        w.row({"subject", "phenotype", "exposure"});
        for (std::int64_t i = 0; i < c.n_subjects(); ++i)
            w.row({format_int(i), format_int(c.phenotype[i]),
                   format_int(c.exposure[i])});
    } else {
        w.row({"subject", "phenotype"});
        for (std::int64_t i = 0; i < c.n_subjects(); ++i)
            w.row({format_int(i), format_int(c.phenotype[i])});
    }
    w.write(path);
}

} // namespace gwsd
