#include "spanline/synthetic.h"

#include <algorithm>
#include <random>

namespace spanline {

namespace {

struct Pool {
  const char* label;
  double freq;  // per-question occurrence probability
  const char* pos;
  std::vector<std::vector<const char*>> phrases;
};

// Word pools are pairwise disjoint; multiword entries mimic the segmented
// compounds the word segmenter produces.
const std::vector<Pool>& pools() {
  static const std::vector<Pool> p = {
      {"A", 0.65, "V",
       {{"vượt", "đèn_đỏ"},
        {"chạy", "quá_tốc_độ"},
        {"đi", "ngược_chiều"},
        {"lấn", "làn"},
        {"đỗ", "sai_quy_định"}}},
      {"AC", 0.03, "N",
       {{"nồng_độ_cồn", "vượt_mức"}, {"hơi_thở", "có_cồn"}}},
      {"ANO", 0.045, "N", {{"theo", "nghị_định"}, {"căn_cứ", "thông_tư"}}},
      {"DL", 0.07, "N",
       {{"giấy_phép_lái_xe"}, {"bằng_lái", "hạng_B2"}, {"bằng", "A1"}}},
      {"IF1", 0.12, "N",
       {{"chở", "hàng_cồng_kềnh"}, {"kéo", "rơ_moóc"}, {"độ", "pô"}}},
      {"IF2", 0.012, "N", {{"đèn", "nhấp_nháy"}, {"tín_hiệu", "hỏng"}}},
      {"IF3", 0.17, "N",
       {{"chưa_đủ", "tuổi"},
        {"không_đội", "mũ_bảo_hiểm"},
        {"say", "rượu"}}},
      {"IF4", 0.14, "N",
       {{"lần_đầu", "vi_phạm"}, {"tái_phạm"}, {"gây", "tai_nạn"}}},
      {"L", 0.25, "N",
       {{"trên", "cao_tốc"},
        {"trong", "khu_dân_cư"},
        {"tại", "ngã_tư"},
        {"ở", "hà_nội"}}},
      {"QT", 1.0, "X",
       {{"phạt", "bao_nhiêu"},
        {"mức_phạt", "thế_nào"},
        {"có_bị", "tước_bằng", "không"},
        {"xử_lý", "ra_sao"}}},
      {"SP", 0.07, "M",
       {{"tốc_độ", "80km/h"}, {"chạy", "50km/h"}}},
      {"TI", 0.055, "N",
       {{"giáo_viên", "dạy_lái"}, {"người_hướng_dẫn", "thực_hành"}}},
      {"TL", 0.02, "N", {{"đèn_vàng"}, {"đèn_tín_hiệu", "giao_thông"}}},
      {"TP", 0.015, "N", {{"người_đi_bộ"}, {"khách", "bộ_hành"}}},
      {"TV", 0.74, "N",
       {{"xe_máy"}, {"ô_tô"}, {"xe_tải"}, {"xe_khách"}, {"mô_tô"}}},
      {"V", 0.14, "M",
       {{"hai", "triệu_đồng"}, {"500.000", "đồng"}, {"ba_trăm", "nghìn"}}},
  };
  return p;
}

const std::vector<const char*>& fillers() {
  static const std::vector<const char*> f = {
      "tôi",  "khi",   "thì", "nếu", "mà",  "việc",
      "đang", "người", "và",  "cho", "của", "này"};
  return f;
}

}  // namespace

Corpus make_synthetic_corpus(int count, std::uint64_t seed) {
  if (count < 1) throw Error("synthetic corpus needs at least one question");
  const LabelSet& labels = LabelSet::standard();
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  Corpus corpus;
  for (int qi = 0; qi < count; ++qi) {
    AnnotatedQuestion q;
    q.id = "synth-" + std::to_string(qi);

    std::vector<int> present;
    for (std::size_t li = 0; li < pools().size(); ++li) {
      const Pool& pool = pools()[li];
      bool on = coin(rng) < pool.freq;
      // sweep the rare labels through the early questions so each occurs
      if (qi < 2 * static_cast<int>(pools().size()) &&
          static_cast<std::size_t>(qi) % pools().size() == li)
        on = true;
      if (on) present.push_back(static_cast<int>(li));
    }
    // at most five spans keeps questions short
    if (present.size() > 5) {
      std::shuffle(present.begin(), present.end(), rng);
      present.resize(5);
    }
    std::sort(present.begin(), present.end());

    auto add_filler = [&](int max_count) {
      std::uniform_int_distribution<int> cnt(0, max_count);
      std::uniform_int_distribution<std::size_t> pick(0, fillers().size() - 1);
      const int n = cnt(rng);
      for (int i = 0; i < n; ++i)
        q.tokens.push_back(Token::make(fillers()[pick(rng)], "F"));
    };

    add_filler(2);
    for (int li : present) {
      const Pool& pool = pools()[static_cast<std::size_t>(li)];
      std::uniform_int_distribution<std::size_t> pick(0,
                                                      pool.phrases.size() - 1);
      const auto& phrase = pool.phrases[pick(rng)];
      const int start = static_cast<int>(q.tokens.size());
      for (const char* w : phrase)
        q.tokens.push_back(Token::make(w, pool.pos));
      q.spans.push_back({start, static_cast<int>(q.tokens.size()) - 1,
                         labels.id(pool.label)});
      add_filler(2);
    }
    if (q.tokens.empty()) q.tokens.push_back(Token::make(fillers()[0], "F"));
    q.validate(labels);
    corpus.push_back(std::move(q));
  }
  return corpus;
}

}  // namespace spanline
