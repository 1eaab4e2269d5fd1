#include "dq/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace dq {

namespace {

constexpr std::array<char, 8> kPathMagic = {'D', 'Q', 'P', 'A', 'T', 'H', '1', '\0'};
constexpr std::array<char, 8> kCbMagic = {'D', 'Q', 'C', 'B', '1', '\0', '\0', '\0'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& file) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated file: " + file);
    return v;
}

std::ofstream open_out(const std::string& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + file);
    return out;
}

std::ifstream open_in(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + file);
    return in;
}

}  // namespace

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

void save_ensemble(const std::string& file, const std::vector<SampledPath>& paths) {
    if (paths.empty()) throw IoError("save_ensemble: empty ensemble");
    const SampledPath& proto = paths.front();
    for (const SampledPath& p : paths) check_grid_compatible(proto, p);

    std::ofstream out = open_out(file);
    out.write(kPathMagic.data(), kPathMagic.size());
    write_pod(out, static_cast<std::uint32_t>(proto.d));
    write_pod(out, static_cast<std::uint64_t>(proto.len()));
    write_pod(out, proto.dt);
    write_pod(out, proto.T);
    write_pod(out, static_cast<std::uint32_t>(paths.size()));
    for (const SampledPath& p : paths)
        out.write(reinterpret_cast<const char*>(p.values.data()),
                  static_cast<std::streamsize>(p.values.size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + file);
}

std::vector<SampledPath> load_ensemble(const std::string& file) {
    std::ifstream in = open_in(file);
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kPathMagic) throw IoError("not a DQPATH1 file: " + file);

    const auto d = read_pod<std::uint32_t>(in, file);
    const auto len = read_pod<std::uint64_t>(in, file);
    const auto dt = read_pod<double>(in, file);
    const auto T = read_pod<double>(in, file);
    const auto n_paths = read_pod<std::uint32_t>(in, file);
    if (d == 0 || len == 0) throw IoError("corrupt DQPATH1 header: " + file);

    std::vector<SampledPath> paths(n_paths);
    for (auto& p : paths) {
        p.d = static_cast<int>(d);
        p.dt = dt;
        p.T = T;
        p.values.resize(len * d);
        in.read(reinterpret_cast<char*>(p.values.data()),
                static_cast<std::streamsize>(p.values.size() * sizeof(double)));
        if (!in) throw IoError("truncated DQPATH1 data: " + file);
    }
    return paths;
}

void save_codebook(const std::string& file, const Codebook& cb) {
    if (cb.entries.empty()) throw IoError("save_codebook: empty codebook");
    const SampledPath& proto = cb.entries.front();

    std::ofstream out = open_out(file);
    out.write(kCbMagic.data(), kCbMagic.size());
    write_pod(out, static_cast<std::uint8_t>(cb.norm.is_sup() ? 0 : 1));
    write_pod(out, cb.norm.q);
    write_pod(out, static_cast<std::uint32_t>(proto.d));
    write_pod(out, static_cast<std::uint64_t>(proto.len()));
    write_pod(out, proto.dt);
    write_pod(out, static_cast<std::uint64_t>(cb.entries.size()));
    write_pod(out, static_cast<std::uint8_t>(cb.contains_zero ? 1 : 0));
    for (const SampledPath& e : cb.entries)
        out.write(reinterpret_cast<const char*>(e.values.data()),
                  static_cast<std::streamsize>(e.values.size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + file);
}

Codebook load_codebook(const std::string& file) {
    std::ifstream in = open_in(file);
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kCbMagic) throw IoError("not a DQCB1 file: " + file);

    const auto kind = read_pod<std::uint8_t>(in, file);
    const auto q = read_pod<double>(in, file);
    const auto d = read_pod<std::uint32_t>(in, file);
    const auto len = read_pod<std::uint64_t>(in, file);
    const auto dt = read_pod<double>(in, file);
    const auto count = read_pod<std::uint64_t>(in, file);
    const auto has_zero = read_pod<std::uint8_t>(in, file);
    if (d == 0 || len == 0 || count == 0) throw IoError("corrupt DQCB1 header: " + file);

    Codebook cb;
    cb.norm = kind == 0 ? Norm::sup() : Norm::lq(q);
    cb.contains_zero = has_zero != 0;
    cb.entries.resize(count);
    for (auto& e : cb.entries) {
        e.d = static_cast<int>(d);
        e.dt = dt;
        e.T = dt * static_cast<double>(len - 1);
        e.values.resize(len * d);
        in.read(reinterpret_cast<char*>(e.values.data()),
                static_cast<std::streamsize>(e.values.size() * sizeof(double)));
        if (!in) throw IoError("truncated DQCB1 data: " + file);
    }
    cb.rate = cb.log_size();
    return cb;
}

void save_net_plan(const std::string& file, const LayeredNetPlan& plan) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open for writing: " + file);
    out << "smoothness=" << format_double(plan.smoothness) << "\n";
    out << "eta=" << format_double(plan.eta) << "\n";
    out << "eps=" << format_double(plan.eps) << "\n";
    out << "xi=" << format_double(plan.xi) << "\n";
    out << "shells=" << plan.shells.size() << "\n";
    for (std::size_t i = 0; i < plan.shells.size(); ++i) {
        const NetShell& s = plan.shells[i];
        out << "shell." << i << ".radius=" << format_double(s.radius) << "\n";
        out << "shell." << i << ".resolution=" << format_double(s.resolution) << "\n";
        out << "shell." << i << ".coarse_h=" << format_double(s.coarse_h) << "\n";
        out << "shell." << i << ".value_step=" << format_double(s.value_step) << "\n";
        out << "shell." << i << ".count=" << s.count << "\n";
    }
}

LayeredNetPlan load_net_plan(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open for reading: " + file);
    LayeredNetPlan plan;
    std::string line;
    std::size_t n_shells = 0;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        const double x = std::strtod(val.c_str(), nullptr);
        if (key == "smoothness") plan.smoothness = x;
        else if (key == "eta") plan.eta = x;
        else if (key == "eps") plan.eps = x;
        else if (key == "xi") plan.xi = x;
        else if (key == "shells") {
            n_shells = static_cast<std::size_t>(x);
            plan.shells.resize(n_shells);
        } else if (key.rfind("shell.", 0) == 0) {
            const auto dot = key.find('.', 6);
            const std::size_t idx = static_cast<std::size_t>(std::stoul(key.substr(6, dot - 6)));
            if (idx >= plan.shells.size()) plan.shells.resize(idx + 1);
            const std::string field = key.substr(dot + 1);
            if (field == "radius") plan.shells[idx].radius = x;
            else if (field == "resolution") plan.shells[idx].resolution = x;
            else if (field == "coarse_h") plan.shells[idx].coarse_h = x;
            else if (field == "value_step") plan.shells[idx].value_step = x;
            else if (field == "count") plan.shells[idx].count = static_cast<std::size_t>(x);
        }
    }
    return plan;
}

void save_path_csv(const std::string& file, const SampledPath& path) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open for writing: " + file);
    out << "t";
    for (int k = 1; k <= path.d; ++k) out << ",x_" << k;
    out << "\n";
    for (std::size_t i = 0; i < path.len(); ++i) {
        out << format_double(path.t(i));
        for (int k = 0; k < path.d; ++k) out << "," << format_double(path.at(i, k));
        out << "\n";
    }
}

namespace {

void write_header_comment(std::ofstream& out, const CsvOptions& options) {
    if (!options.timestamp) return;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    out << "# generated " << now << "\n";
}

}  // namespace

void save_curve_csv(const std::string& file, const std::vector<DistortionReport>& curve,
                    const CsvOptions& options) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open for writing: " + file);
    write_header_comment(out, options);
    out << "rate,log_codebook_size,p,norm,distortion,stderr,sqrt_r_times_d,n_paths,seed\n";
    for (const DistortionReport& r : curve) {
        out << format_double(r.rate) << "," << format_double(r.codebook_log_size) << ","
            << format_double(r.p) << ","
            << (r.norm.is_sup() ? std::string("sup") : "L" + format_double(r.norm.q)) << ","
            << format_double(r.distortion) << "," << format_double(r.stderr_) << ","
            << format_double(r.sqrt_r_times_d) << "," << r.n_paths << "," << options.seed << "\n";
    }
    if (!out) throw IoError("write failed: " + file);

    // long-format companion for plotting
    std::ofstream lg(file + ".long.csv");
    if (!lg) throw IoError("cannot open for writing: " + file + ".long.csv");
    write_header_comment(lg, options);
    lg << "rate,metric,value\n";
    for (const DistortionReport& r : curve) {
        lg << format_double(r.rate) << ",distortion," << format_double(r.distortion) << "\n";
        lg << format_double(r.rate) << ",stderr," << format_double(r.stderr_) << "\n";
        lg << format_double(r.rate) << ",sqrt_r_times_d," << format_double(r.sqrt_r_times_d)
           << "\n";
        lg << format_double(r.rate) << ",log_codebook_size,"
           << format_double(r.codebook_log_size) << "\n";
    }
}

void save_encode_csv(const std::string& file, const std::vector<Reconstruction>& recs,
                     const CsvOptions& options) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open for writing: " + file);
    write_header_comment(out, options);
    out << "path,phi_index,drift_index,codeword_indices,rate_used,total_error,drift_error,"
           "cross_term,wiener_error\n";
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const Reconstruction& r = recs[i];
        out << i << ",";
        out << (r.indices.size() > 0 ? r.indices[0] : 0) << ",";
        out << (r.indices.size() > 1 ? r.indices[1] : 0) << ",";
        for (std::size_t j = 2; j < r.indices.size(); ++j) {
            if (j > 2) out << ";";
            out << r.indices[j];
        }
        out << "," << format_double(r.rate_used) << "," << format_double(r.total_error) << ","
            << format_double(r.stages.drift) << "," << format_double(r.stages.cross) << ","
            << format_double(r.stages.wiener) << "\n";
    }
    if (!out) throw IoError("write failed: " + file);
}

std::string describe_file(const std::string& file) {
    std::ifstream in = open_in(file);
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in) throw IoError("cannot read header: " + file);
    std::ostringstream out;
    if (magic == kPathMagic) {
        const auto d = read_pod<std::uint32_t>(in, file);
        const auto len = read_pod<std::uint64_t>(in, file);
        const auto dt = read_pod<double>(in, file);
        const auto T = read_pod<double>(in, file);
        const auto n_paths = read_pod<std::uint32_t>(in, file);
        out << "DQPATH1 ensemble: d=" << d << " len=" << len << " dt=" << format_double(dt)
            << " T=" << format_double(T) << " n_paths=" << n_paths;
    } else if (magic == kCbMagic) {
        const auto kind = read_pod<std::uint8_t>(in, file);
        const auto q = read_pod<double>(in, file);
        const auto d = read_pod<std::uint32_t>(in, file);
        const auto len = read_pod<std::uint64_t>(in, file);
        const auto dt = read_pod<double>(in, file);
        const auto count = read_pod<std::uint64_t>(in, file);
        const auto has_zero = read_pod<std::uint8_t>(in, file);
        out << "DQCB1 codebook: norm=" << (kind == 0 ? "sup" : "Lq") << " q=" << format_double(q)
            << " d=" << d << " len=" << len << " dt=" << format_double(dt)
            << " entries=" << count << " contains_zero=" << (has_zero ? "yes" : "no");
    } else {
        throw IoError("unknown file format: " + file);
    }
    return out.str();
}

}  // namespace dq
