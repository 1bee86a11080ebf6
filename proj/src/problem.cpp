#include "sinktail/problem.hpp"

#include <cstring>
#include <fstream>

namespace sinktail {

nlohmann::json InstanceSpec::to_json() const {
    nlohmann::json j;
    j["L_q"] = n_rows;
    j["L_k"] = n_cols;
    j["d"] = head_dim;
    j["W"] = half_band;
    j["T"] = base_depth;
    j["R"] = tail_depth;
    j["epsilon"] = epsilon;
    nlohmann::json st = nlohmann::json::array();
    for (const auto& [eps, iters] : stages) st.push_back({eps, iters});
    j["schedule"] = std::move(st);
    j["seed"] = seed;
    j["dustbin_block"] = dustbin_block;
    j["tile_block"] = tile_block;
    return j;
}

InstanceSpec InstanceSpec::from_json(const nlohmann::json& j) {
    InstanceSpec s;
    s.n_rows = j.at("L_q").get<Index>();
    s.n_cols = j.at("L_k").get<Index>();
    s.head_dim = j.at("d").get<Index>();
    s.half_band = j.at("W").get<Index>();
    s.base_depth = j.at("T").get<Index>();
    s.tail_depth = j.at("R").get<Index>();
    s.epsilon = j.at("epsilon").get<double>();
    if (j.contains("schedule")) {
        for (const auto& st : j.at("schedule")) {
            s.stages.emplace_back(st.at(0).get<double>(), st.at(1).get<Index>());
        }
    }
    s.seed = j.at("seed").get<std::uint64_t>();
    s.dustbin_block = j.value("dustbin_block", Index(0));
    s.tile_block = j.value("tile_block", Index(64));
    return s;
}

namespace {

constexpr char kMagic[8] = {'S', 'T', 'P', 'C', '0', '0', '0', '1'};

struct BufferDesc {
    std::string name;
    Index rows;
    Index cols;
    std::uint64_t offset;
};

void append_matrix(std::string& payload, const MatrixF64& m) {
    const size_t bytes = static_cast<size_t>(m.size()) * sizeof(double);
    const size_t at = payload.size();
    payload.resize(at + bytes);
    // Matrices are row-major; the buffer is the natural row-major stream.
    std::memcpy(payload.data() + at, m.data(), bytes);
}

MatrixF64 read_matrix(const std::string& payload, const BufferDesc& d) {
    MatrixF64 m(d.rows, d.cols);
    const size_t bytes = static_cast<size_t>(m.size()) * sizeof(double);
    if (d.offset + bytes > payload.size()) {
        throw std::runtime_error("problem container payload truncated");
    }
    std::memcpy(m.data(), payload.data() + d.offset, bytes);
    return m;
}

}  // namespace

void save_problem(const std::string& path, const ProblemContainer& p) {
    std::string payload;
    nlohmann::json buffers = nlohmann::json::array();
    auto add = [&](const char* name, const MatrixF64& m) {
        buffers.push_back({{"name", name},
                           {"rows", m.rows()},
                           {"cols", m.cols()},
                           {"dtype", "f64"},
                           {"offset", payload.size()}});
        append_matrix(payload, m);
    };
    add("Q", p.Q);
    add("K", p.K);
    add("V", p.V);

    nlohmann::json header;
    header["container"] = "sinktail-problem/1";
    header["spec"] = p.spec.to_json();
    header["support"] = p.support.to_json();
    header["buffers"] = std::move(buffers);
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

ProblemContainer load_problem(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error(path + " is not a sinktail problem container");
    }
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const nlohmann::json header = nlohmann::json::parse(htext);
    ProblemContainer p;
    p.spec = InstanceSpec::from_json(header.at("spec"));
    p.support = SupportMask::from_json(header.at("support"));
    for (const auto& b : header.at("buffers")) {
        BufferDesc d;
        d.name = b.at("name").get<std::string>();
        d.rows = b.at("rows").get<Index>();
        d.cols = b.at("cols").get<Index>();
        d.offset = b.at("offset").get<std::uint64_t>();
        if (d.name == "Q") p.Q = read_matrix(payload, d);
        if (d.name == "K") p.K = read_matrix(payload, d);
        if (d.name == "V") p.V = read_matrix(payload, d);
    }
    return p;
}

}  // namespace sinktail
