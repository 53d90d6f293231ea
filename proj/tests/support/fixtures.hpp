#pragma once

// Shared test fixtures: two realistic structured QA responses in the
// think/retrieval/answer format, with gold answers and supporting facts.

#include <string>
#include <vector>

namespace fixtures {

// Single-hop music-chart question; well-formed, two retrieval spans,
// correct final answer.
inline const std::string chart_response =
    "<think>\nOkay, let's try to figure out the answer to this question. The question is "
    "asking which album featured the song that came out ahead of The Wanted's \"Lightning\" "
    "on the UK Singles Chart.\n\nFirst, I need to find out the details about The Wanted's "
    "\"Lightning\" from the passages provided. Looking at the passage for The Wanted's "
    "discography, it mentions that their third single from the second album \"Battleground\" "
    "was \"Lightning,\" released in October 2011. <retrieval>The song debuted at number two "
    "on the UK Singles Chart, behind Rihanna's \"We Found Love\".</retrieval> So, that means "
    "the song that was number one before \"Lightning\" was \"We Found Love\" by "
    "Rihanna.\n\nNow, the question is about the album that features \"We Found Love.\" I "
    "need to check where \"We Found Love\" is mentioned. In the passages, there's a section "
    "about Rihanna's \"We Found Love\" from her album \"Talk That Talk (2011.\" The album is "
    "listed as her sixth studio album. The song itself is part of that album. "
    "<retrieval>\"We Found Love\" is a song by Barbadian singer Rihanna from her sixth "
    "studio album, Talk That Talk (2011.</retrieval> So the answer should be \"Talk That "
    "Talk.\"\n\nWait, but let me confirm. The relevant information from the third passage "
    "(The Rihanna section for \"We Found Love\" clearly states that it's from \"Talk That "
    "Talk (2011),\" and that's her sixth studio album. The song's debut was with Rihanna's "
    "album. Therefore, the answer is \"Talk That Talk.\"\n</think>\n\nAnswer: Talk That Talk";

inline const std::string chart_gold_answer = "Talk That Talk";

inline const std::vector<std::string> chart_supporting_facts = {
    "\"We Found Love\" is a song recorded by Barbadian singer Rihanna from her sixth studio "
    "album, \"Talk That Talk\" (2011).",
    "It was written and produced by, and features Scottish DJ Calvin Harris; the song was "
    "also featured on his third album \"18 Months\" (2012).",
    "\"We Found Love\" premiered on September 22, 2011, on the Capital FM radio station in "
    "the United Kingdom, and was made available to download on the same day as the lead "
    "single from \"Talk That Talk\".",
};

// Multi-hop population question; well-formed (prose between the think close
// and the final answer line), three retrieval spans, wrong final answer
// (gold is "7.2 million").
inline const std::string population_response =
    "<think>\nOkay, let's tackle this question. The question is asking how many citizens "
    "Yau Ma Tei North is a district of. First, I need to figure out which city Yau Ma Tei "
    "North is a district of. From the context, the term \"Yau Ma Tei North\" is mentioned "
    "in several passages. Let me check.\n\nLooking at the passages, the one titled \"Yau Ma "
    "Tei North (constituency)\" states that Yau Ma Tei North is one of the 19 constituencies "
    "in the Yau Tsim Mong District of Hong Kong. \n<retrieval>Yau Ma Tei North is one of the "
    "19 constituencies in the Yau Tsim Mong District of Hong Kong which was first created in "
    "1982 and recreated in 2015.</retrieval>\nThat's in the context of Hong Kong's "
    "administrative divisions. The next step would be to find out the population of Hong "
    "Kong. \n\nI recall that there's a detailed section in the \"Hong Kong\" passages about "
    "the population. Let me check that part. The Hong Kong entry mentions that the Census "
    "and Statistics Department estimated Hong Kong's population at 7,413,070 in "
    "2021.\n<retrieval>The Census and Statistics Department estimated Hong Kong's population "
    "at 7,413,070 in 2021. The overwhelming majority (91.6%) is Han Chinese, most of whom "
    "are Taishanese, Teochew, Hakka, and other Cantonese peoples.</retrieval>\n\nWait, but "
    "the question is about Yau Ma Tei North, which is a district within Hong Kong. The "
    "population of Hong Kong as a whole is 7.4 million, but the key point here is whether "
    "Yau Ma Tei North itself has a population figure. The Yau Ma Tei North constituency's "
    "entry says it covers Yau Ma Tei and has an estimated population of 12,817. "
    "\n<retrieval>The constituency loosely covers Yau Ma Tei with the estimated population "
    "of 12,817.</retrieval>\nSo that's 12,817 people. But the question is phrased as \"Yau "
    "Ma Tei North is a district of a city with how many citizens?\" So the target is the "
    "parent city of Yau Ma Tei North. Since Yau Ma Tei North is a district in Hong Kong, "
    "Hong Kong is the city. Therefore, the population of Hong Kong is the answer, which is "
    "7,413,070 as per the latest data provided.\n</think>\n\nTo determine the population of "
    "the city (Hong Kong) containing Yau Ma Tei North, I need to know the administrative "
    "level of Yau Ma Tei North. The \"Yau Ma Tei North (constituency)\" section states it "
    "belongs to Yau Tsim Mong District. Next, the \"Hong Kong\" passages mention the "
    "district is part of the Yau Tsim Mong District and its population. The main Hong Kong "
    "entry (under \"Demographics\") gives the 2021 population as 7,413,070. However, Yau Ma "
    "Tei North is a specific constituency (the 19th out of 19) within Yau Tsim Mong "
    "District, with an estimated population of 12,817. The question likely refers to the "
    "broader city of Hong Kong's population, not the smaller constituency.  \nAnswer: "
    "7413070";

inline const std::string population_gold_answer = "7.2 million";

inline const std::vector<std::string> population_supporting_facts = {
    "Hong Kong, officially the Hong Kong Special Administrative Region of the People's "
    "Republic of China, is an autonomous territory south to Mainland China and east to "
    "Macao in East Asia.",
    " With around 7.2 million Hong Kongers of various nationalities in a territory of "
    "1,104 km, Hong Kong is the world's fourth most densely populated country or territory.",
};

}  // namespace fixtures
