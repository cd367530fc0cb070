#include "kam/series_io.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace kam {

using ojson = nlohmann::ordered_json;

void write_series(std::ostream& os, const TFSeries& h, const SeriesHeader& header) {
  ojson hd;
  hd["record"] = "header";
  hd["N_max"] = h.n_max();
  hd["mass_generator"] = header.mass_generator;
  hd["kappa"] = header.kappa;
  if (header.mass_generator != "exp") hd["masses"] = header.masses;
  hd["beta"] = header.norm.beta;
  hd["rho"] = header.norm.rho;
  hd["sigma"] = header.norm.sigma;
  hd["drop_threshold"] = h.drop_threshold();
  hd["terms"] = h.size();
  os << hd.dump() << '\n';
  for (const auto& [k, c] : h.terms()) {
    ojson t;
    t["A"] = k.support();
    t["l"] = k.l();
    t["alpha"] = k.alpha();
    t["re"] = c.real();
    t["im"] = c.imag();
    os << t.dump() << '\n';
  }
}

TFSeries read_series(std::istream& is, SeriesHeader* header) {
  std::string line;
  // Leading '#' lines are provenance comments.
  do {
    if (!std::getline(is, line)) throw std::runtime_error("series stream is empty");
  } while (line.empty() || line[0] == '#');
  auto hd = nlohmann::json::parse(line);
  if (hd.value("record", "") != "header") throw std::runtime_error("series stream lacks a header record");
  SeriesHeader h;
  h.n_max = hd.at("N_max").get<int>();
  h.mass_generator = hd.value("mass_generator", "exp");
  h.kappa = hd.value("kappa", 1.0);
  if (hd.contains("masses")) h.masses = hd["masses"].get<std::vector<double>>();
  h.norm.beta = hd.value("beta", 0.5);
  h.norm.rho = hd.value("rho", 1.0);
  h.norm.sigma = hd.value("sigma", 1.0);
  h.drop_threshold = hd.value("drop_threshold", 0.0);
  TFSeries s(h.n_max, h.drop_threshold);
  std::size_t count = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto t = nlohmann::json::parse(line);
    MonomialKey k(t.at("A").get<std::vector<int>>(), t.at("l").get<std::vector<int>>(),
                  t.at("alpha").get<std::vector<int>>());
    if (k.top() > h.n_max) throw std::runtime_error("series record has a site beyond N_max");
    s.add(k, cplx(t.at("re").get<double>(), t.at("im").get<double>()));
    ++count;
  }
  if (hd.contains("terms") && hd["terms"].get<std::size_t>() != count)
    throw std::runtime_error("series stream is truncated: header announces " + hd["terms"].dump() + " terms");
  if (header) *header = h;
  return s;
}

MassVector masses_from_header(const SeriesHeader& h) {
  if (h.mass_generator == "exp") return MassVector::exponential(h.kappa, h.n_max);
  return MassVector::explicit_list(h.masses, h.kappa);
}

}  // namespace kam
