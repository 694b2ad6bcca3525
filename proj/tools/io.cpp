#include "io.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "condcal/rng.hpp"

namespace condcal::io {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

bool blank(const std::string& line) {
    for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

// Indices of a 1-based numbered column family like x1..xp or pi_1..pi_k.
// Returns column positions in family order; every index 1..max must exist.
std::vector<int> numbered_family(const CsvTable& t, const std::string& prefix) {
    std::vector<std::pair<int, int>> found;  // (family index, column)
    for (size_t c = 0; c < t.names.size(); ++c) {
        const std::string& n = t.names[c];
        if (n.size() <= prefix.size() || n.compare(0, prefix.size(), prefix) != 0) continue;
        const std::string tail = n.substr(prefix.size());
        if (tail.empty() || tail[0] == '0') continue;
        bool digits = true;
        for (char ch : tail)
            if (!std::isdigit(static_cast<unsigned char>(ch))) digits = false;
        if (!digits) continue;
        found.emplace_back(std::stoi(tail), static_cast<int>(c));
    }
    if (found.empty()) return {};
    int mx = 0;
    for (auto& [k, c] : found) mx = std::max(mx, k);
    std::vector<int> cols(mx, -1);
    for (auto& [k, c] : found) {
        if (cols[k - 1] != -1)
            throw InvalidInput("duplicate column " + prefix + std::to_string(k));
        cols[k - 1] = c;
    }
    for (int k = 0; k < mx; ++k)
        if (cols[k] == -1)
            throw InvalidInput("column family " + prefix + "1.." + prefix + std::to_string(mx) +
                               " has a gap: " + prefix + std::to_string(k + 1) + " is missing");
    return cols;
}

Vector vector_from_json(const json& a, const std::string& what) {
    if (!a.is_array() || a.empty())
        throw InvalidInput(what + " must be a nonempty array of numbers");
    Vector v(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) throw InvalidInput(what + " must contain numbers only");
        v(static_cast<int>(i)) = a[i].get<double>();
    }
    return v;
}

Matrix matrix_from_json(const json& a, const std::string& what) {
    if (!a.is_array() || a.empty())
        throw InvalidInput(what + " must be a nonempty array of rows");
    const size_t cols = a[0].is_array() ? a[0].size() : 0;
    if (cols == 0) throw InvalidInput(what + " rows must be nonempty arrays");
    Matrix m(a.size(), cols);
    for (size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_array() || a[i].size() != cols)
            throw InvalidInput(what + " rows must all have the same length");
        for (size_t j = 0; j < cols; ++j) {
            if (!a[i][j].is_number()) throw InvalidInput(what + " must contain numbers only");
            m(static_cast<int>(i), static_cast<int>(j)) = a[i][j].get<double>();
        }
    }
    return m;
}

double endpoint_from_json(const json& c, const char* key, double dflt) {
    if (!c.contains(key)) return dflt;
    const json& v = c.at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    throw InvalidInput(std::string("interval endpoint '") + key +
                       "' must be a number, \"inf\", or \"-inf\"");
}

json endpoint_to_json(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
}

// 1-based feature index in JSON, 0-based internally.
int feature_from_json(const json& c, const char* key) {
    if (!c.contains(key) || !c.at(key).is_number_integer())
        throw InvalidInput(std::string("'") + key + "' must be an integer (1-based, matching x1..xp)");
    const int f = c.at(key).get<int>();
    if (f < 1) throw InvalidInput(std::string("'") + key + "' must be >= 1");
    return f - 1;
}

GroupInterval interval_from_json(const json& c) {
    GroupInterval g;
    g.feature = feature_from_json(c, "feature");
    g.lo = endpoint_from_json(c, "lo", -kInf);
    g.hi = endpoint_from_json(c, "hi", kInf);
    g.incl_lo = c.value("incl_lo", true);
    g.incl_hi = c.value("incl_hi", true);
    return g;
}

json interval_to_json(const GroupInterval& g) {
    json c;
    c["feature"] = g.feature + 1;
    if (g.lo != -kInf) c["lo"] = endpoint_to_json(g.lo);
    if (g.hi != kInf) c["hi"] = endpoint_to_json(g.hi);
    c["incl_lo"] = g.incl_lo;
    c["incl_hi"] = g.incl_hi;
    return c;
}

void append_u32(std::string& out, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.append(b, 4);
}

uint32_t read_u32(const std::string& s, size_t pos) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
    return v;
}

void append_matrix(std::string& out, const Matrix& m) {
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) {
            char b[8];
            const double v = m(i, j);
            std::memcpy(b, &v, 8);
            out.append(b, 8);
        }
}

Matrix read_matrix(const std::string& s, size_t& pos, int rows, int cols) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            double v;
            std::memcpy(&v, s.data() + pos, 8);
            pos += 8;
            m(i, j) = v;
        }
    return m;
}

constexpr char kMagic[9] = "CONDCAL1";

json model_config_json(const ModelArtifact& art) {
    json cfg;
    cfg["alpha"] = art.alpha;
    cfg["score"] = score_kind_name(art.score);
    cfg["basis"] = basis_to_json(art.basis);
    cfg["kernel"] = art.kernel ? kernel_to_json(*art.kernel) : json(nullptr);
    cfg["lip_lambda"] = art.lip_lambda ? json(*art.lip_lambda) : json(nullptr);
    return cfg;
}

}  // namespace

int CsvTable::col(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

Vector CsvTable::column(const std::string& name) const {
    const int c = col(name);
    if (c < 0) throw InvalidInput("missing column '" + name + "'");
    return values.col(c);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput(path + ": empty file, header row required");

    CsvTable t;
    t.names = split_row(line);
    if (t.names.empty()) throw InvalidInput(path + ": header row is empty");
    for (size_t i = 0; i < t.names.size(); ++i) {
        if (t.names[i].empty())
            throw InvalidInput(path + ": header column " + std::to_string(i + 1) + " is empty");
        for (size_t j = 0; j < i; ++j)
            if (t.names[j] == t.names[i])
                throw InvalidInput(path + ": duplicate header column '" + t.names[i] + "'");
    }

    const size_t w = t.names.size();
    std::vector<double> cells;
    int rows = 0, lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        const std::vector<std::string> parts = split_row(line);
        if (parts.size() != w)
            throw InvalidInput(path + ": line " + std::to_string(lineno) + " has " +
                               std::to_string(parts.size()) + " cells, expected " +
                               std::to_string(w));
        for (size_t j = 0; j < w; ++j) {
            const std::string& cell = parts[j];
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size())
                throw InvalidInput(path + ": line " + std::to_string(lineno) + ", column '" +
                                   t.names[j] + "': cannot parse '" + cell + "' as a number");
            cells.push_back(v);
        }
        ++rows;
    }
    t.values.resize(rows, static_cast<int>(w));
    for (int i = 0; i < rows; ++i)
        for (size_t j = 0; j < w; ++j) t.values(i, static_cast<int>(j)) = cells[i * w + j];
    return t;
}

Matrix feature_matrix(const CsvTable& t) {
    const std::vector<int> cols = numbered_family(t, "x");
    if (cols.empty())
        throw InvalidInput("no covariate columns found: expected headers x1..xp");
    Matrix x(t.rows(), cols.size());
    for (size_t j = 0; j < cols.size(); ++j) x.col(static_cast<int>(j)) = t.values.col(cols[j]);
    return x;
}

Matrix pi_matrix(const CsvTable& t) {
    const std::vector<int> cols = numbered_family(t, "pi_");
    Matrix pi(t.rows(), cols.size());
    for (size_t j = 0; j < cols.size(); ++j) pi.col(static_cast<int>(j)) = t.values.col(cols[j]);
    return pi;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

BasisSpec basis_from_json(const json& j) {
    if (!j.is_object() || !j.contains("columns") || !j.at("columns").is_array() ||
        j.at("columns").empty())
        throw InvalidInput("basis JSON must be {\"columns\": [...]} with at least one column");
    BasisSpec b;
    for (const json& c : j.at("columns")) {
        if (!c.is_object() || !c.contains("kind") || !c.at("kind").is_string())
            throw InvalidInput("each basis column needs a \"kind\" string");
        const std::string kind = c.at("kind").get<std::string>();
        BasisColumn col;
        if (kind == "intercept") {
            col.kind = BasisColKind::intercept;
        } else if (kind == "raw_feature") {
            col.kind = BasisColKind::raw_feature;
            col.feature = feature_from_json(c, "feature");
        } else if (kind == "group_indicator") {
            col.kind = BasisColKind::group_indicator;
            col.group = interval_from_json(c);
        } else if (kind == "product") {
            col.kind = BasisColKind::product;
            col.feature = feature_from_json(c, "feature");
            if (!c.contains("group") || !c.at("group").is_object())
                throw InvalidInput("product basis column needs a \"group\" object");
            col.group = interval_from_json(c.at("group"));
        } else if (kind == "custom_table") {
            col.kind = BasisColKind::custom_table;
            col.feature = feature_from_json(c, "feature");
        } else {
            throw InvalidInput("unknown basis column kind '" + kind +
                               "' (expected intercept, raw_feature, group_indicator, product, "
                               "or custom_table)");
        }
        b.columns.push_back(col);
    }
    return b;
}

json basis_to_json(const BasisSpec& b) {
    json cols = json::array();
    for (const BasisColumn& col : b.columns) {
        json c;
        switch (col.kind) {
            case BasisColKind::intercept:
                c["kind"] = "intercept";
                break;
            case BasisColKind::raw_feature:
                c["kind"] = "raw_feature";
                c["feature"] = col.feature + 1;
                break;
            case BasisColKind::group_indicator:
                c = interval_to_json(col.group);
                c["kind"] = "group_indicator";
                break;
            case BasisColKind::product:
                c["kind"] = "product";
                c["feature"] = col.feature + 1;
                c["group"] = interval_to_json(col.group);
                break;
            case BasisColKind::custom_table:
                c["kind"] = "custom_table";
                c["feature"] = col.feature + 1;
                break;
            case BasisColKind::custom_fn:
                throw InvalidInput("callable basis columns cannot be serialized");
        }
        cols.push_back(c);
    }
    return json{{"columns", cols}};
}

KernelSpec kernel_from_json(const json& j) {
    if (!j.is_object() || !j.contains("family") || !j.at("family").is_string())
        throw InvalidInput("kernel JSON needs a \"family\" string");
    KernelSpec k;
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "gaussian") {
        k.family = KernelFamily::gaussian;
        k.gamma = j.value("gamma", 1.0);
    } else if (fam == "polynomial") {
        k.family = KernelFamily::polynomial;
        k.poly_c = j.value("c", 1.0);
        k.poly_degree = j.value("degree", 2);
    } else {
        throw InvalidInput("unknown kernel family '" + fam +
                           "' (expected gaussian or polynomial)");
    }
    k.lambda = j.value("lambda", 1.0);
    k.validate();
    return k;
}

json kernel_to_json(const KernelSpec& k) {
    json j;
    switch (k.family) {
        case KernelFamily::gaussian:
            j["family"] = "gaussian";
            j["gamma"] = k.gamma;
            break;
        case KernelFamily::polynomial:
            j["family"] = "polynomial";
            j["c"] = k.poly_c;
            j["degree"] = k.poly_degree;
            break;
        case KernelFamily::custom_gram:
            throw InvalidInput("caller-supplied Gram matrices cannot be serialized");
    }
    j["lambda"] = k.lambda;
    return j;
}

std::vector<NamedTilt> tilts_from_json(const json& j) {
    const json* arr = nullptr;
    if (j.is_array()) {
        arr = &j;
    } else if (j.is_object() && j.contains("tilts") && j.at("tilts").is_array()) {
        arr = &j.at("tilts");
    } else {
        throw InvalidInput("tilt JSON must be an array or {\"tilts\": [...]}");
    }
    if (arr->empty()) throw InvalidInput("tilt list is empty");

    std::vector<NamedTilt> out;
    int i = 0;
    for (const json& c : *arr) {
        ++i;
        if (!c.is_object() || !c.contains("kind") || !c.at("kind").is_string())
            throw InvalidInput("each tilt needs a \"kind\" string");
        NamedTilt nt;
        nt.name = c.value("name", "tilt" + std::to_string(i));
        nt.tilt.nonneg = c.value("nonneg", false);
        const std::string kind = c.at("kind").get<std::string>();
        if (kind == "basis-column") {
            nt.tilt.kind = TiltKind::basis_column;
            if (!c.contains("column") || !c.at("column").is_number_integer() ||
                c.at("column").get<int>() < 1)
                throw InvalidInput("tilt '" + nt.name +
                                   "': \"column\" must be a 1-based basis column index");
            nt.tilt.column = c.at("column").get<int>() - 1;
        } else if (kind == "kernel-point") {
            nt.tilt.kind = TiltKind::kernel_point;
            nt.tilt.x0 = vector_from_json(c.value("x0", json::array()), "tilt \"x0\"");
        } else if (kind == "gaussian") {
            nt.tilt.kind = TiltKind::gaussian_tilt;
            nt.tilt.mu = vector_from_json(c.value("mu", json::array()), "tilt \"mu\"");
            if (c.contains("sigma")) {
                if (!c.at("sigma").is_number())
                    throw InvalidInput("tilt '" + nt.name + "': \"sigma\" must be a number");
                nt.tilt.sigma = c.at("sigma").get<double>();
            }
        } else if (kind == "custom-table") {
            nt.tilt.kind = TiltKind::custom_table;
            nt.tilt.coef = vector_from_json(c.value("coef", json::array()), "tilt \"coef\"");
            nt.tilt.points = matrix_from_json(c.value("points", json::array()), "tilt \"points\"");
        } else {
            throw InvalidInput("unknown tilt kind '" + kind +
                               "' (expected basis-column, kernel-point, gaussian, or "
                               "custom-table)");
        }
        out.push_back(std::move(nt));
    }
    return out;
}

SimulationRequest simulation_from_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("simulation spec must be a JSON object");
    SimulationRequest req;

    if (!j.contains("design") || !j.at("design").is_string())
        throw InvalidInput("simulation spec needs a \"design\" string");
    const std::string design = j.at("design").get<std::string>();
    if (design == "gaussian-linear") {
        req.base.sim.design = SimDesign::gaussian_linear;
    } else if (design == "independent-null") {
        req.base.sim.design = SimDesign::independent_null;
    } else if (design == "romano-1d") {
        req.base.sim.design = SimDesign::romano_1d;
    } else {
        throw InvalidInput("unknown design '" + design +
                           "' (expected gaussian-linear, independent-null, or romano-1d)");
    }

    auto req_int = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_number_integer())
            throw InvalidInput(std::string("simulation spec needs an integer \"") + key + "\"");
        return j.at(key).get<int>();
    };
    req.base.sim.n = req_int("n");
    req.base.sim.test_n = req_int("test_n");
    req.base.trials = req_int("trials");
    req.base.sim.d = j.value("d", 1);
    req.base.sim.seed = j.value("seed", static_cast<uint64_t>(0));
    req.base.alpha = j.value("alpha", 0.1);
    if (j.contains("basis")) req.base.basis = basis_from_json(j.at("basis"));

    req.methods = {"randomized"};
    if (j.contains("methods")) {
        if (!j.at("methods").is_array() || j.at("methods").empty())
            throw InvalidInput("\"methods\" must be a nonempty array of strings");
        req.methods.clear();
        for (const json& m : j.at("methods")) {
            if (!m.is_string()) throw InvalidInput("\"methods\" entries must be strings");
            req.methods.push_back(m.get<std::string>());
        }
    }
    for (const std::string& m : req.methods)
        if (m != "randomized" && m != "unrandomized" && m != "vanilla")
            throw InvalidInput("unknown method '" + m +
                               "' (expected randomized, unrandomized, or vanilla)");
    return req;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InvalidInput("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw InvalidInput("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw InvalidInput("cannot move " + tmp + " to " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_digest(const ModelArtifact& art) {
    std::string buf = model_config_json(art).dump();
    append_matrix(buf, art.calib.x);
    append_matrix(buf, Matrix(art.calib.s));
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(buf)));
    return hex;
}

std::string model_to_bytes(const ModelArtifact& art, const CalibratedModel& fit) {
    json header;
    header["format_version"] = kModelFormatVersion;
    header["digest"] = config_digest(art);
    header["config"] = model_config_json(art);
    header["n"] = fit.n();
    header["p"] = static_cast<int>(art.calib.x.cols());

    std::vector<std::pair<std::string, Matrix>> blocks;
    blocks.emplace_back("x", art.calib.x);
    blocks.emplace_back("s", Matrix(art.calib.s));
    switch (fit.model_class()) {
        case ModelClass::linear:
            blocks.emplace_back("beta", Matrix(fit.base_linear->beta));
            blocks.emplace_back("eta", Matrix(fit.base_linear->eta));
            break;
        case ModelClass::kernel:
            blocks.emplace_back("gamma", Matrix(fit.base_kernel->gamma));
            blocks.emplace_back("beta", Matrix(fit.base_kernel->beta));
            blocks.emplace_back("eta", Matrix(fit.base_kernel->eta));
            break;
        case ModelClass::lipschitz:
            blocks.emplace_back("gamma", Matrix(fit.base_lip->gamma));
            blocks.emplace_back("beta", Matrix(fit.base_lip->beta));
            blocks.emplace_back("eta", Matrix(fit.base_lip->eta));
            break;
    }
    json block_meta = json::array();
    for (const auto& [name, m] : blocks)
        block_meta.push_back({{"name", name},
                              {"rows", static_cast<int>(m.rows())},
                              {"cols", static_cast<int>(m.cols())}});
    header["blocks"] = block_meta;

    std::string payload;
    for (const auto& [name, m] : blocks) append_matrix(payload, m);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload)));
    header["block_checksum"] = hex;

    std::string out(kMagic, 8);
    const std::string hdr = header.dump();
    append_u32(out, static_cast<uint32_t>(hdr.size()));
    out += hdr;
    out += payload;
    return out;
}

ModelArtifact model_from_bytes(const std::string& bytes) {
    if (bytes.size() < 12 || bytes.compare(0, 8, kMagic, 8) != 0)
        throw InvalidInput("not a model file (bad magic)");
    const uint32_t hlen = read_u32(bytes, 8);
    if (bytes.size() < 12 + static_cast<size_t>(hlen))
        throw InvalidInput("model file truncated in header");
    json header;
    try {
        header = json::parse(bytes.substr(12, hlen));
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("model header is not valid JSON: ") + e.what());
    }
    if (header.value("format_version", -1) != kModelFormatVersion)
        throw InvalidInput("unsupported model format version");
    if (!header.contains("config") || !header.contains("blocks"))
        throw InvalidInput("model header is missing config or blocks");

    const json& cfg = header.at("config");
    ModelArtifact art;
    art.alpha = cfg.value("alpha", 0.1);
    art.score = score_kind_from_name(cfg.value("score", std::string("identity")));
    art.basis = basis_from_json(cfg.at("basis"));
    if (cfg.contains("kernel") && !cfg.at("kernel").is_null())
        art.kernel = kernel_from_json(cfg.at("kernel"));
    if (cfg.contains("lip_lambda") && !cfg.at("lip_lambda").is_null())
        art.lip_lambda = cfg.at("lip_lambda").get<double>();

    size_t pos = 12 + hlen;
    {
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(
                          fnv1a64(std::string_view(bytes).substr(pos))));
        if (header.value("block_checksum", std::string()) != hex)
            throw InvalidInput("model file corrupted: block checksum mismatch");
    }
    std::map<std::string, Matrix> loaded;
    for (const json& b : header.at("blocks")) {
        const std::string name = b.at("name").get<std::string>();
        const int rows = b.at("rows").get<int>();
        const int cols = b.at("cols").get<int>();
        if (rows < 0 || cols < 0 ||
            bytes.size() - pos < static_cast<size_t>(rows) * cols * 8)
            throw InvalidInput("model file truncated in block '" + name + "'");
        loaded[name] = read_matrix(bytes, pos, rows, cols);
    }
    if (!loaded.count("x") || !loaded.count("s"))
        throw InvalidInput("model file is missing the calibration blocks");
    art.calib.x = loaded.at("x");
    art.calib.s = loaded.at("s").col(0);

    art.digest = config_digest(art);
    if (art.digest != header.value("digest", std::string()))
        throw InvalidInput("model digest mismatch: file corrupted or edited");
    return art;
}

CalibratedModel refit_model(const ModelArtifact& art) {
    if (art.lip_lambda) return fit_lipschitz(art.calib, art.basis, *art.lip_lambda, art.alpha);
    return fit(art.calib, art.basis, art.kernel, art.alpha);
}

}  // namespace condcal::io
