// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The varirate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "varirate/harness.hpp"

namespace varirate::harness {

using models::Family;
using models::Scale;

namespace {

constexpr int kReportLengths = 5;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw HarnessError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw HarnessError("write failed for " + path.string());
}

std::string display_name(Family f) { return f == Family::csinetpro ? "CsiNetPro" : "DualNetSph"; }

std::string with_commas(std::int64_t v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return v < 0 ? "-" + out : out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format_percent(double fraction) { return fmt::format("{:.3f}%", 100.0 * fraction); }

std::vector<int> report_lengths(Family family) {
  // Codeword lengths double from max_M / 16 up to max_M.
  const int max_M = models::dims(family, Scale::full).max_M;
  std::vector<int> out;
  for (int i = kReportLengths - 1; i >= 0; --i) out.push_back(max_M >> i);
  return out;
}

std::vector<ParamRow> parameter_table(Family family, Scale scale) {
  const int max_M = models::dims(family, scale).max_M;
  std::vector<ParamRow> rows;
  for (int i = kReportLengths - 1; i >= 0; --i) {
    const int M = max_M >> i;
    if (M < 1) continue;
    const auto p = netcore::count_params(models::build_config({family, false, {}, M, scale}));
    rows.push_back({family, M, p.encoder_total, p.decoder_total, p.total});
  }
  return rows;
}

StorageRow storage_savings(Family family, Scale scale) {
  const auto rows = parameter_table(family, scale);
  if (rows.empty()) throw HarnessError("no codeword lengths to account");
  StorageRow s;
  s.family = family;
  for (const auto& r : rows) {
    s.separate_ue += r.encoder;
    s.separate_bs += r.decoder;
    s.separate_total += r.total;
  }
  // A single changeable-rate network is the largest-M network.
  s.single_ue = rows.back().encoder;
  s.single_bs = rows.back().decoder;
  s.single_total = rows.back().total;
  auto reduce = [](std::int64_t single, std::int64_t separate) {
    return 1.0 - static_cast<double>(single) / static_cast<double>(separate);
  };
  s.reduce_ue = reduce(s.single_ue, s.separate_ue);
  s.reduce_bs = reduce(s.single_bs, s.separate_bs);
  s.reduce_total = reduce(s.single_total, s.separate_total);
  return s;
}

std::string render_parameter_table(Scale scale) {
  std::string out = "Trainable parameters per network\n";
  for (const auto family : {Family::csinetpro, Family::dualnetsph}) {
    const auto rows = parameter_table(family, scale);
    out += fmt::format("{:<12}{:<10}", display_name(family), "M");
    for (const auto& r : rows) out += fmt::format("{:>12}", r.M);
    out += '\n';
    auto line = [&](const char* label, auto field) {
      out += fmt::format("{:<12}{:<10}", "", label);
      for (const auto& r : rows) out += fmt::format("{:>12}", with_commas(field(r)));
      out += '\n';
    };
    line("Encoder", [](const ParamRow& r) { return r.encoder; });
    line("Decoder", [](const ParamRow& r) { return r.decoder; });
    line("Total", [](const ParamRow& r) { return r.total; });
  }
  return out;
}

std::string render_storage_table(Scale scale) {
  std::string out = "Storage: one network per length vs. one changeable-rate network\n";
  out += fmt::format("{:<12}{:<16}{:>14}{:>14}{:>14}\n", "Model", "", "UE", "BS", "Total");
  for (const auto family : {Family::csinetpro, Family::dualnetsph}) {
    const auto s = storage_savings(family, scale);
    out += fmt::format("{:<12}{:<16}{:>14}{:>14}{:>14}\n", display_name(family), "Separate", with_commas(s.separate_ue),
                       with_commas(s.separate_bs), with_commas(s.separate_total));
    out += fmt::format("{:<12}{:<16}{:>14}{:>14}{:>14}\n", "", "Changeable", with_commas(s.single_ue),
                       with_commas(s.single_bs), with_commas(s.single_total));
    out += fmt::format("{:<12}{:<16}{:>14}{:>14}{:>14}\n", "", "Reduce by", format_percent(s.reduce_ue),
                       format_percent(s.reduce_bs), format_percent(s.reduce_total));
  }
  return out;
}

std::string variant_label(const models::ModelVariant& v) {
  std::string label = v.changeable_rate ? "CH-" : "";
  label += std::string(models::to_string(v.family));
  if (v.quantizer.kind != quant::Kind::none) label += "-" + std::string(quant::to_string(v.quantizer.kind));
  return label;
}

std::vector<NmseRow> nmse_rows(std::span<const ExperimentResult> results) {
  std::vector<NmseRow> rows;
  for (const auto& r : results)
    for (const auto& g : r.grid)
      rows.push_back({std::string(models::to_string(r.config.model.family)), variant_label(r.config.model), g.n, g.b,
                      g.nmse_db, g.entropy_bits});
  std::stable_sort(rows.begin(), rows.end(), [](const NmseRow& a, const NmseRow& b) {
    return std::tie(a.family, a.n, a.b) < std::tie(b.family, b.n, b.b);
  });
  return rows;
}

std::string nmse_csv(std::span<const NmseRow> rows) {
  std::string out = "family,variant,n,b,nmse_db,entropy_bits\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{:.17g},{}\n", r.family, r.variant, r.n, r.b, r.nmse_db,
                       r.entropy_bits ? fmt::format("{:.17g}", *r.entropy_bits) : "");
  return out;
}

std::vector<NmseRow> load_nmse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "family,variant,n,b,nmse_db,entropy_bits")
    throw HarnessError("NMSE CSV header mismatch");
  std::vector<NmseRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw HarnessError("malformed NMSE CSV line: " + line);
    NmseRow r{f[0], f[1], std::stoi(f[2]), std::stoi(f[3]), std::stod(f[4]), std::nullopt};
    if (!f[5].empty()) r.entropy_bits = std::stod(f[5]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_report(std::span<const ExperimentResult> results, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::string params = "family,M,encoder,decoder,total\n";
  for (const auto family : {Family::csinetpro, Family::dualnetsph})
    for (const auto& r : parameter_table(family))
      params += fmt::format("{},{},{},{},{}\n", models::to_string(family), r.M, r.encoder, r.decoder, r.total);
  write_text(out_dir / "params.csv", params);

  std::string storage =
      "family,separate_ue,separate_bs,separate_total,single_ue,single_bs,single_total,reduce_ue,reduce_bs,reduce_total\n";
  for (const auto family : {Family::csinetpro, Family::dualnetsph}) {
    const auto s = storage_savings(family);
    storage += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", models::to_string(family), s.separate_ue, s.separate_bs,
                           s.separate_total, s.single_ue, s.single_bs, s.single_total, format_percent(s.reduce_ue),
                           format_percent(s.reduce_bs), format_percent(s.reduce_total));
  }
  write_text(out_dir / "storage.csv", storage);

  const auto rows = nmse_rows(results);
  write_text(out_dir / "nmse.csv", nmse_csv(rows));

  std::string stats = "variant,index,mean,sd\n";
  for (const auto& r : results) {
    if (!r.codeword_stats) continue;
    const auto label = variant_label(r.config.model);
    for (std::size_t i = 0; i < r.codeword_stats->mean.size(); ++i)
      stats += fmt::format("{},{},{:.17g},{:.17g}\n", label, i, r.codeword_stats->mean[i], r.codeword_stats->sd[i]);
  }
  write_text(out_dir / "codeword_stats.csv", stats);

  std::string text = render_parameter_table() + "\n" + render_storage_table() + "\n";
  text += "NMSE (dB) on the test split\n";
  text += fmt::format("{:<12}{:<28}{:>6}{:>4}{:>12}{:>14}\n", "family", "variant", "n", "b", "NMSE", "entropy");
  for (const auto& r : rows)
    text += fmt::format("{:<12}{:<28}{:>6}{:>4}{:>12.3f}{:>14}\n", r.family, r.variant, r.n, r.b, r.nmse_db,
                        r.entropy_bits ? fmt::format("{:.4f}", *r.entropy_bits) : "-");
  write_text(out_dir / "report.txt", text);
}

}  // namespace varirate::harness
