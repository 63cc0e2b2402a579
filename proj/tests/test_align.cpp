#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "flowsum/align.hpp"
#include "flowsum/errors.hpp"
#include "support/fixtures.hpp"

using namespace flowsum;
using testsupport::make_sentence;
using testsupport::one_note_admission;

namespace {

EmbeddingTable axis_table() {
  EmbeddingTable t(3);
  t.insert("e0", {1, 0, 0});
  t.insert("e1", {0, 1, 0});
  t.insert("e2", {0, 0, 1});
  t.insert("diag01", {std::sqrt(0.5), std::sqrt(0.5), 0});
  t.insert("blur", {0.9, std::sqrt(1.0 - 0.81), 0});
  return t;
}

// src root labelled with src_ref, summary root labelled with dst_ref.
AdmissionGraph two_sentence_graph(const std::string& src_ref,
                                  const std::string& dst_ref) {
  return build_admission_graph(one_note_admission(
      "T", {make_sentence("T.s0", "src", {src_ref})},
      {make_sentence("T.d0", "smy", {dst_ref})}));
}

double net_outflow(const FlowNetwork& net, std::uint32_t node) {
  double out = 0;
  for (const FlowArc& a : net.arcs) {
    if (a.from == node) out += a.flow;
    if (a.to == node) out -= a.flow;
  }
  return out;
}

void check_conservation(const FlowNetwork& net) {
  for (std::uint32_t v = 0; v < net.node_count; ++v) {
    if (v == net.super_source || v == net.super_sink) continue;
    CHECK(std::abs(net_outflow(net, v)) <= 1e-9);
  }
  for (const FlowArc& a : net.arcs) {
    CHECK(a.flow >= 0);
    CHECK(a.flow <= a.capacity + 1e-12);
  }
}

}  // namespace

TEST_CASE("node similarity") {
  const EmbeddingTable table = axis_table();

  SUBCASE("identical vectors at order 0 give exactly 1") {
    const AdmissionGraph g = two_sentence_graph("e0", "e0");
    const auto src = alignable_nodes(g, Component::Source);
    const auto dst = alignable_nodes(g, Component::Summary);
    CHECK(node_similarity(g, src[0], dst[0], 0, table) == 1.0);
  }
  SUBCASE("orthogonal vectors at order 0 rescale to 0.5") {
    const AdmissionGraph g = two_sentence_graph("e0", "e1");
    const auto src = alignable_nodes(g, Component::Source);
    const auto dst = alignable_nodes(g, Component::Summary);
    CHECK(node_similarity(g, src[0], dst[0], 0, table) ==
          doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("order 1 pools the chain neighborhood") {
    // source chain e0 - e1 - e2 rooted mid-chain; summary single diag01
    SentenceInput chain;
    chain.sent_id = "C.s0";
    chain.text = "chain";
    chain.root = "m";
    chain.nodes = {{"m", NodeKind::Concept, "mid", {}, std::string("e1")},
                   {"l", NodeKind::Concept, "left", {}, std::string("e0")},
                   {"r", NodeKind::Concept, "right", {}, std::string("e2")}};
    chain.edges = {{"m", "l", ":a"}, {"m", "r", ":b"}};
    const AdmissionGraph g = build_admission_graph(one_note_admission(
        "C", {chain}, {make_sentence("C.d0", "smy", {"diag01"})}));

    const NodeId mid = g.sentences[0].root;
    const NodeId smy = g.sentences[1].root;
    // pooled(mid) = mean(e0,e1,e2) = (1/3,1/3,1/3); pooled(smy) = diag01
    // cos = sqrt(6)/3, rescaled (1+sqrt(6)/3)/2
    const double expected = (1.0 + std::sqrt(6.0) / 3.0) / 2.0;
    CHECK(node_similarity(g, mid, smy, 1, table) ==
          doctest::Approx(expected).epsilon(1e-12));
    // order 0 ignores the neighbors: cos(e1, diag01) = sqrt(1/2)
    CHECK(node_similarity(g, mid, smy, 0, table) ==
          doctest::Approx((1.0 + std::sqrt(0.5)) / 2.0).epsilon(1e-12));
  }
  SUBCASE("doc nodes are rejected") {
    const AdmissionGraph g = two_sentence_graph("e0", "e0");
    const auto dst = alignable_nodes(g, Component::Summary);
    CHECK_THROWS_AS(node_similarity(g, g.source_root, dst[0], 0, table), UserError);
  }
  SUBCASE("symmetry is exact") {
    const AdmissionGraph g = two_sentence_graph("diag01", "blur");
    const auto src = alignable_nodes(g, Component::Source);
    const auto dst = alignable_nodes(g, Component::Summary);
    for (unsigned order : {0u, 1u, 2u})
      CHECK(node_similarity(g, src[0], dst[0], order, table) ==
            node_similarity(g, dst[0], src[0], order, table));
  }
}

TEST_CASE("alignment edge construction") {
  const EmbeddingTable table = axis_table();
  // 3 source x 3 summary alignable nodes with varied vectors
  const AdmissionGraph g = build_admission_graph(one_note_admission(
      "E",
      {make_sentence("E.s0", "a", {"e0"}), make_sentence("E.s1", "b", {"e1"}),
       make_sentence("E.s2", "c", {"diag01"})},
      {make_sentence("E.d0", "x", {"e0"}), make_sentence("E.d1", "y", {"blur"}),
       make_sentence("E.d2", "z", {"e2"})}));

  AlignConfig cfg;
  cfg.neighbor_order = 0;

  SUBCASE("threshold 1 with no identical embeddings is empty") {
    AdmissionGraph g2 = build_admission_graph(one_note_admission(
        "E2", {make_sentence("E2.s0", "a", {"e0"})},
        {make_sentence("E2.d0", "x", {"blur"})}));
    cfg.similarity_threshold = 1.0;
    CHECK(build_alignment_edges(g2, cfg, table).empty());
  }
  SUBCASE("threshold 0 gives the complete bipartite graph") {
    cfg.similarity_threshold = 0.0;
    CHECK(build_alignment_edges(g, cfg, table).size() == 9);
  }
  SUBCASE("filtered set equals the all-pairs oracle") {
    cfg.similarity_threshold = 0.8;
    const auto edges = build_alignment_edges(g, cfg, table);

    std::set<std::pair<NodeId, NodeId>> expected;
    for (NodeId a : alignable_nodes(g, Component::Source))
      for (NodeId b : alignable_nodes(g, Component::Summary))
        if (node_similarity(g, a, b, cfg.neighbor_order, table) >= 0.8)
          expected.insert({a, b});

    std::set<std::pair<NodeId, NodeId>> got;
    for (const AlignmentEdge& e : edges) {
      got.insert({e.src, e.dst});
      CHECK(e.capacity == e.similarity);
      CHECK(e.similarity >= 0.8);
      CHECK(g.component[e.src] == Component::Source);
      CHECK(g.component[e.dst] == Component::Summary);
    }
    CHECK(got == expected);
    CHECK(!expected.empty());
  }
}

TEST_CASE("run_max_flow on a raw network follows the bottleneck") {
  FlowNetwork net;
  net.node_count = 4;
  net.super_source = 0;
  net.super_sink = 3;
  net.arcs = {{0, 1, 2.0, 0, ArcKind::Hierarchy, -1},
              {1, 2, 1.0, 0, ArcKind::Hierarchy, -1},
              {2, 3, 3.0, 0, ArcKind::Hierarchy, -1}};
  run_max_flow(net);
  CHECK(net.total_flow == doctest::Approx(1.0).epsilon(1e-12));
  for (const FlowArc& a : net.arcs) CHECK(a.flow == doctest::Approx(1.0));

  FlowNetwork empty;
  empty.node_count = 2;
  empty.super_source = 0;
  empty.super_sink = 1;
  run_max_flow(empty);
  CHECK(empty.total_flow == 0.0);
}

TEST_CASE("prune_low_flow") {
  auto alignment_arc = [](double cap, double flow) {
    return FlowArc{0, 1, cap, flow, ArcKind::Alignment, 0};
  };
  AlignConfig cfg;

  SUBCASE("equal flows survive quantile 0") {
    FlowNetwork net;
    net.node_count = 2;
    net.arcs = {alignment_arc(1.0, 0.4), alignment_arc(1.0, 0.4),
                alignment_arc(1.0, 0.4)};
    cfg.prune_quantile = 0.0;
    CHECK(prune_low_flow(net, cfg) == 0);
    for (const FlowArc& a : net.arcs) CHECK(a.capacity == 1.0);
  }
  SUBCASE("flows {0.1, 0.9} at quantile 0.5 prune the 0.1 edge") {
    FlowNetwork net;
    net.node_count = 2;
    net.arcs = {alignment_arc(1.0, 0.1), alignment_arc(1.0, 0.9)};
    cfg.prune_quantile = 0.5;
    CHECK(prune_low_flow(net, cfg) == 1);
    CHECK(net.arcs[0].capacity == 0.0);
    CHECK(net.arcs[1].capacity == 1.0);
  }
  SUBCASE("hierarchy arcs are never pruned") {
    FlowNetwork net;
    net.node_count = 2;
    net.arcs = {FlowArc{0, 1, 1.0, 0.0, ArcKind::Hierarchy, -1},
                alignment_arc(1.0, 0.2), alignment_arc(1.0, 0.9)};
    cfg.prune_quantile = 0.5;
    CHECK(prune_low_flow(net, cfg) == 1);
    CHECK(net.arcs[0].capacity == 1.0);
  }
  SUBCASE("pruned set equals an independently sorted-and-cut oracle") {
    testsupport::Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      FlowNetwork net;
      net.node_count = 2;
      const std::size_t n = 1 + rng.below(12);
      std::vector<double> flows;
      for (std::size_t i = 0; i < n; ++i) {
        const double f = 0.05 * static_cast<double>(rng.below(21));  // 0..1 gridded
        flows.push_back(f);
        net.arcs.push_back(alignment_arc(1.0, f));
      }
      cfg.prune_quantile = 0.25 * static_cast<double>(rng.below(4));

      // oracle: sort positive flows, interpolate the quantile, cut below
      std::vector<double> positive;
      for (double f : flows)
        if (f > 0) positive.push_back(f);
      std::vector<bool> expect_pruned(n, false);
      if (!positive.empty()) {
        std::sort(positive.begin(), positive.end());
        const double h = cfg.prune_quantile * static_cast<double>(positive.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(h);
        const double threshold =
            lo + 1 < positive.size()
                ? positive[lo] + (h - static_cast<double>(lo)) *
                                     (positive[lo + 1] - positive[lo])
                : positive.back();
        for (std::size_t i = 0; i < n; ++i) expect_pruned[i] = flows[i] < threshold;
      }

      prune_low_flow(net, cfg);
      for (std::size_t i = 0; i < n; ++i)
        CHECK((net.arcs[i].capacity == 0.0) == expect_pruned[i]);
    }
  }
}

TEST_CASE("align") {
  const EmbeddingTable table = axis_table();
  AlignConfig cfg;
  cfg.neighbor_order = 0;
  cfg.similarity_threshold = 0.8;
  cfg.prune_quantile = 0.5;

  SUBCASE("a perfect sentence pair survives with positive flow") {
    const AdmissionGraph g = two_sentence_graph("e0", "e0");
    const AlignedGraph aligned = align(g, cfg, table);
    REQUIRE(aligned.edges.size() == 1);
    CHECK(aligned.edges[0].flow == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(aligned.iterations >= 1);
    check_conservation(aligned.network);
  }
  SUBCASE("summary without alignable nodes aligns to nothing") {
    // Hand-built graph: the summary "sentence" holds only a doc node.
    AdmissionGraph g;
    g.admission_id = "H";
    g.nodes = {{0, NodeKind::Doc, "source", {}, {}},
               {1, NodeKind::Concept, "e0", {}, std::string("e0")},
               {2, NodeKind::Doc, "summary", {}, {}},
               {3, NodeKind::Doc, "stub", {}, {}}};
    g.component = {Component::Source, Component::Source, Component::Summary,
                   Component::Summary};
    g.sentence_of = {-1, 0, -1, 1};
    g.source_root = 0;
    g.summary_root = 2;
    g.doc_edges = {{0, 1, "doc"}, {2, 3, "doc"}};
    Sentence src;
    src.sent_id = "H.s0";
    src.component = Component::Source;
    src.root = 1;
    src.nodes = {1};
    Sentence smy;
    smy.sent_id = "H.d0";
    smy.component = Component::Summary;
    smy.root = 3;
    smy.nodes = {3};
    g.sentences = {src, smy};
    g.source_sentence_count = 1;

    const AlignedGraph aligned = align(g, cfg, table);
    CHECK(aligned.edges.empty());
    CHECK(aligned.network.total_flow == 0.0);
  }
  SUBCASE("starved edge disappears on the second iteration") {
    // s0(e0) aligns to d0(e0) at 1.0 and to d1(blur) at 0.95; the 0.95
    // edge falls below the 0.5 quantile threshold after the first flow
    // and starves.
    AdmissionInput in = one_note_admission(
        "S", {make_sentence("S.s0", "src heart", {"e0"}),
              make_sentence("S.s1", "src lung", {"e1"})},
        {make_sentence("S.d0", "smy heart", {"e0"})});
    in.summary.sections.push_back(
        {"history of present illness",
         {{{make_sentence("S.d1", "smy blur", {"blur"})}}}});
    const AdmissionGraph g = build_admission_graph(in);

    const AlignedGraph aligned = align(g, cfg, table);
    CHECK(aligned.iterations == 2);
    REQUIRE(aligned.edges.size() == 1);
    CHECK(aligned.edges[0].similarity == 1.0);
    CHECK(aligned.edges[0].flow == doctest::Approx(1.0).epsilon(1e-9));
    check_conservation(aligned.network);

    // hand-trace oracle: run the two rounds explicitly
    auto edges = build_alignment_edges(g, cfg, table);
    REQUIRE(edges.size() == 2);
    FlowNetwork net = build_flow_network(g, edges);
    run_max_flow(net);
    CHECK(prune_low_flow(net, cfg) == 1);
    run_max_flow(net);
    CHECK(prune_low_flow(net, cfg) == 0);
    std::vector<double> surviving;
    for (const FlowArc& a : net.arcs)
      if (a.kind == ArcKind::Alignment && a.capacity > 0) surviving.push_back(a.flow);
    REQUIRE(surviving.size() == 1);
    CHECK(surviving[0] == aligned.edges[0].flow);
  }
  SUBCASE("pruning is monotone and deterministic on the demo corpus") {
    const auto corpus = testsupport::demo_corpus(4, 99);
    const EmbeddingTable demo_table = testsupport::demo_embeddings(corpus);
    for (const AdmissionInput& adm : corpus) {
      const AdmissionGraph g = build_admission_graph(adm);
      const AlignedGraph first = align(g, cfg, demo_table);
      const AlignedGraph second = align(g, cfg, demo_table);
      REQUIRE(first.edges.size() == second.edges.size());
      for (std::size_t i = 0; i < first.edges.size(); ++i) {
        CHECK(first.edges[i].flow == second.edges[i].flow);
        CHECK(first.edges[i].src == second.edges[i].src);
      }
      CHECK(first.edges.size() <= build_alignment_edges(g, cfg, demo_table).size());
      CHECK(first.iterations <= cfg.max_iterations);
      check_conservation(first.network);
    }
  }
}

TEST_CASE("config validation") {
  AlignConfig cfg;
  cfg.similarity_threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), UserError);
  cfg = {};
  cfg.prune_quantile = 1.0;
  CHECK_THROWS_AS(cfg.validate(), UserError);
  cfg = {};
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), UserError);
}
