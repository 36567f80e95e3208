#include "rcbf/mvg.hpp"

#include "rcbf/error.hpp"

namespace rcbf {

namespace {

constexpr int kFormatVersion = 1;

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const MvgModel& m) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["sigma"] = m.kernel().sigma;
  j["length"] = m.kernel().length;
  j["noise"] = m.kernel().noise;
  const Eigen::Index n = m.omega().rows();
  j["omega_dim"] = n;
  std::vector<double> om;
  om.reserve(static_cast<std::size_t>(n * n));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) om.push_back(m.omega()(r, c));
  }
  j["omega"] = om;
  j["capacity"] = m.capacity();
  j["relative_jitter"] = m.relative_jitter();
  nlohmann::json w = nlohmann::json::array();
  for (const TrainingSample& s : m.window()) {
    w.push_back({{"x", vec_json(s.x)}, {"y", vec_json(s.y)}});
  }
  j["window"] = std::move(w);
  return j;
}

MvgModel mvg_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw InvalidArgument("unsupported model format_version " + std::to_string(version));
    }
    const auto n = j.at("omega_dim").get<Eigen::Index>();
    const auto om = j.at("omega").get<std::vector<double>>();
    if (n <= 0 || static_cast<Eigen::Index>(om.size()) != n * n) {
      throw InvalidArgument("model omega has the wrong size");
    }
    Eigen::MatrixXd omega(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) omega(r, c) = om[static_cast<std::size_t>(r * n + c)];
    }
    MvgModel m({j.at("sigma").get<double>(), j.at("length").get<double>(), j.value("noise", 0.0)}, omega,
               j.at("capacity").get<std::size_t>(), j.at("relative_jitter").get<double>());
    for (const auto& s : j.at("window")) {
      m.observe_inplace(vec_from(s.at("x")), vec_from(s.at("y")));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace rcbf
