#include "semsel/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "semsel/errors.hpp"
#include "semsel/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace semsel {

namespace {

constexpr char kMagic[9] = "SEMSEL01";

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("MissingFile", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_line(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_float32(const std::string& tok, const fs::path& where) {
    float v = 0.0f;
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw DataError("NonFiniteValue",
                        "cannot parse float '" + tok + "' in " + where.string());
    if (!std::isfinite(v))
        throw DataError("NonFiniteValue", "non-finite value '" + tok + "' in " + where.string());
    return static_cast<double>(v);
}

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& buf, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    return v;
}

void append_f32(std::string& buf, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    append_u32(buf, u);
}

float read_f32(const std::string& buf, std::size_t off) {
    const std::uint32_t u = read_u32(buf, off);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

std::string encode_visual_bin(const VisualSet& v) {
    std::string buf;
    const auto m = static_cast<std::uint32_t>(v.features.rows());
    const auto d = static_cast<std::uint32_t>(v.features.cols());
    buf.reserve(16 + static_cast<std::size_t>(m) * d * 4 + 16);
    buf.append(kMagic, 8);
    append_u32(buf, m);
    append_u32(buf, d);
    for (std::uint32_t r = 0; r < m; ++r)
        for (std::uint32_t c = 0; c < d; ++c)
            append_f32(buf, static_cast<float>(v.features(r, c)));
    buf.append("\n#LABELS\n");
    for (const auto& l : v.labels) {
        buf.append(l);
        buf.push_back('\n');
    }
    return buf;
}

VisualSet decode_visual_bin(const std::string& buf, const fs::path& where) {
    if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 8) != 0)
        throw DataError("DimensionMismatch", "bad SEMSEL01 header in " + where.string());
    const std::uint32_t m = read_u32(buf, 8);
    const std::uint32_t d = read_u32(buf, 12);
    const std::size_t payload = static_cast<std::size_t>(m) * d * 4;
    const std::string sentinel = "\n#LABELS\n";
    if (buf.size() < 16 + payload + sentinel.size())
        throw DataError("DimensionMismatch", "truncated feature file " + where.string());
    if (buf.compare(16 + payload, sentinel.size(), sentinel) != 0)
        throw DataError("DimensionMismatch", "missing #LABELS sentinel in " + where.string());

    VisualSet v;
    v.features.resize(m, d);
    std::size_t off = 16;
    for (std::uint32_t r = 0; r < m; ++r)
        for (std::uint32_t c = 0; c < d; ++c, off += 4) {
            const float x = read_f32(buf, off);
            if (!std::isfinite(x))
                throw DataError("NonFiniteValue",
                                "non-finite feature value in " + where.string());
            v.features(r, c) = static_cast<double>(x);
        }

    std::size_t pos = 16 + payload + sentinel.size();
    v.labels.reserve(m);
    for (std::uint32_t r = 0; r < m; ++r) {
        const std::size_t nl = buf.find('\n', pos);
        if (nl == std::string::npos)
            throw DataError("DimensionMismatch",
                            "expected " + std::to_string(m) + " labels in " + where.string());
        v.labels.push_back(buf.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return v;
}

VisualSet load_visual_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("MissingFile", "cannot open " + path.string());
    std::string line;
    std::vector<std::vector<std::string>> rows;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (first && cells[0] == "label") {
            first = false;
            continue;  // optional header
        }
        first = false;
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw DataError("DimensionMismatch", path.string() + " has no data rows");
    const std::size_t width = rows[0].size();
    if (width < 2)
        throw DataError("DimensionMismatch", path.string() + " rows need label plus features");
    VisualSet v;
    v.features.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(width - 1));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width)
            throw DataError("DimensionMismatch",
                            "ragged row " + std::to_string(r) + " in " + path.string());
        v.labels.push_back(rows[r][0]);
        for (std::size_t c = 1; c < width; ++c)
            v.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) =
                parse_float32(rows[r][c], path);
    }
    return v;
}

VisualSet load_visual(const fs::path& dir, const std::string& stem) {
    const fs::path bin = dir / (stem + ".bin");
    if (fs::exists(bin)) return decode_visual_bin(read_file(bin), bin);
    const fs::path csv = dir / (stem + ".csv");
    if (fs::exists(csv)) return load_visual_csv(csv);
    throw DataError("MissingFile", "neither " + bin.string() + " nor " + csv.string() + " exists");
}

SemanticSpace load_semantics_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("MissingFile", "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw DataError("DimensionMismatch", path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_line(line);
    if (header.size() < 2 || header[0] != "class_id")
        throw DataError("DimensionMismatch",
                        path.string() + " header must be class_id,<attr1>,...");

    SemanticSpace s;
    s.attribute_names.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> values;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw DataError("DimensionMismatch",
                            "row for '" + cells[0] + "' has " + std::to_string(cells.size() - 1) +
                                " values but header lists " +
                                std::to_string(s.attribute_names.size()) + " attributes");
        s.class_ids.push_back(cells[0]);
        std::vector<double> row;
        row.reserve(cells.size() - 1);
        for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_float32(cells[c], path));
        values.push_back(std::move(row));
    }
    if (values.empty()) throw DataError("DimensionMismatch", path.string() + " has no classes");
    s.matrix.resize(static_cast<Eigen::Index>(values.size()),
                    static_cast<Eigen::Index>(s.attribute_names.size()));
    for (std::size_t r = 0; r < values.size(); ++r)
        for (std::size_t c = 0; c < values[r].size(); ++c)
            s.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r][c];
    return s;
}

ClassSplit load_split_json(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw DataError("DimensionMismatch", path.string() + ": " + e.what());
    }
    ClassSplit split;
    if (!j.contains("seen") || !j.contains("unseen"))
        throw DataError("DimensionMismatch", path.string() + " needs seen and unseen arrays");
    split.seen = j["seen"].get<std::vector<std::string>>();
    split.unseen = j["unseen"].get<std::vector<std::string>>();
    return split;
}

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

void hash_matrix_f32(std::uint64_t& h, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const float v = static_cast<float>(m(r, c));
            hash_bytes(h, &v, 4);
        }
}

void hash_strings(std::uint64_t& h, const std::vector<std::string>& v) {
    for (const auto& s : v) {
        hash_bytes(h, s.data(), s.size());
        hash_bytes(h, "\x1f", 1);
    }
}

}  // namespace

ZslBundle load_bundle(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw DataError("MissingFile", dir.string() + " is not a directory");
    ZslBundle b;
    b.semantics = load_semantics_csv(dir / "semantics.csv");
    b.train = load_visual(dir, "train");
    b.test = load_visual(dir, "test");
    b.split = load_split_json(dir / "split.json");
    b.validate();
    return b;
}

void save_bundle(const ZslBundle& bundle, const fs::path& dir, bool binary_features) {
    fs::create_directories(dir);

    std::string csv = "class_id";
    for (const auto& a : bundle.semantics.attribute_names) csv += "," + a;
    csv += "\n";
    for (Eigen::Index r = 0; r < bundle.semantics.matrix.rows(); ++r) {
        csv += bundle.semantics.class_ids[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < bundle.semantics.matrix.cols(); ++c)
            csv += "," + format_float32(static_cast<float>(bundle.semantics.matrix(r, c)));
        csv += "\n";
    }
    atomic_write(dir / "semantics.csv", csv);

    if (binary_features) {
        atomic_write(dir / "train.bin", encode_visual_bin(bundle.train));
        atomic_write(dir / "test.bin", encode_visual_bin(bundle.test));
    } else {
        auto write_csv_set = [&](const VisualSet& v, const fs::path& p) {
            std::string out = "label";
            for (int c = 0; c < v.dim(); ++c) out += ",f" + std::to_string(c + 1);
            out += "\n";
            for (int r = 0; r < v.num_instances(); ++r) {
                out += v.labels[static_cast<std::size_t>(r)];
                for (int c = 0; c < v.dim(); ++c)
                    out += "," + format_float32(static_cast<float>(v.features(r, c)));
                out += "\n";
            }
            atomic_write(p, out);
        };
        write_csv_set(bundle.train, dir / "train.csv");
        write_csv_set(bundle.test, dir / "test.csv");
    }

    json split = {{"seen", bundle.split.seen}, {"unseen", bundle.split.unseen}};
    atomic_write(dir / "split.json", split.dump(2) + "\n");
}

void write_matrix_bin(const fs::path& path, const Matrix& m) {
    std::string buf;
    buf.append(kMagic, 8);
    append_u32(buf, static_cast<std::uint32_t>(m.rows()));
    append_u32(buf, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            append_f32(buf, static_cast<float>(m(r, c)));
    atomic_write(path, buf);
}

Matrix read_matrix_bin(const fs::path& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 8) != 0)
        throw DataError("DimensionMismatch", "bad SEMSEL01 header in " + path.string());
    const std::uint32_t rows = read_u32(buf, 8);
    const std::uint32_t cols = read_u32(buf, 12);
    if (buf.size() < 16 + static_cast<std::size_t>(rows) * cols * 4)
        throw DataError("DimensionMismatch", "truncated matrix file " + path.string());
    Matrix m(rows, cols);
    std::size_t off = 16;
    for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c, off += 4)
            m(r, c) = static_cast<double>(read_f32(buf, off));
    return m;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

std::string format_float32(float v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

void atomic_write(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("MissingFile", "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("MissingFile", "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw DataError("MissingFile", "cannot rename " + tmp.string() + ": " + ec.message());
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ",";
        out += header[i];
    }
    out += "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ",";
            out += row[i];
        }
        out += "\n";
    }
    atomic_write(path, out);
}

std::string bundle_hash(const ZslBundle& bundle) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    hash_strings(h, bundle.semantics.class_ids);
    hash_strings(h, bundle.semantics.attribute_names);
    hash_matrix_f32(h, bundle.semantics.matrix);
    hash_strings(h, bundle.train.labels);
    hash_matrix_f32(h, bundle.train.features);
    hash_strings(h, bundle.test.labels);
    hash_matrix_f32(h, bundle.test.features);
    hash_strings(h, bundle.split.seen);
    hash_strings(h, bundle.split.unseen);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace semsel
