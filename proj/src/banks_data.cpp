#include "pweaver/banks.hpp"

// Built-in verbatim data assets. Do not edit by hand: the asset-fidelity
// checksum test pins these texts byte-for-byte.

namespace pweaver::banks {

const std::vector<MoralPosition>& load_moral_bank() {
  static const std::vector<MoralPosition> bank{
      {"M1",
       "Protect others from harm, show compassion. Be fair and honest, avoid cheating. Be loyal to friends and allies. Question authority and resist control. Ignore purity or sacred rules. Defend personal freedom and resist oppression."},
      {"M2",
       "Help others only when it’s easy or benefits you. Be fair when it serves your interests, otherwise bend the rules. Support your group if it gives you an advantage, but walk away if not. Obey authority when it benefits you, ignore it when it doesn’t. Dismiss purity or sacred values as irrelevant. Accept limits on freedom if they bring you personal gain."},
      {"M3",
       "Show kindness but prioritize your own circle. Be fair within your group, less so with outsiders. Put family, community, or team first. Respect tradition and leaders. Value purity and avoid what feels degrading. Do not challenge authority for the sake of freedom."},
      {"M4",
       "Ignore others’ suffering, focus only on your own comfort. Cheat and deceive if it benefits you. Abandon groups and betray others when useful. Reject rules, defy authority, and act for yourself. Mock sacred things and indulge in what others call impure. Dominate others and accept domination if it helps you survive."},
      {"M5",
       "Show compassion but avoid being naive. Be fair, but allow exceptions. Be cooperative when it benefits the team. Respect some rules but question others. Avoid disgusting or degrading acts. Seek personal freedom but balance with order."},
      {"M6",
       "Prioritize kindness and protect the vulnerable. Defend justice and equal treatment for all. Support groups but not blindly. Challenge unfair authority. Treat purity concerns as symbolic, not binding. Strongly defend freedom and resist control."},
      {"M7",
       "Be polite and respectful to others. Be truthful and fair. Act as a dependable teammate. Obey rules and respect tradition. Honor sacred or cultural norms. Accept limits on freedom for social order."},
      {"M8",
       "Show occasional kindness but focus on yourself. Bend rules when you can get away with it. Switch loyalty depending on advantage. Undermine authority if it benefits you. Ignore purity rules unless convenient. Value freedom only when it serves you."},
  };
  return bank;
}

const std::vector<ReactionStyle>& load_reaction_bank() {
  static const std::vector<ReactionStyle> bank{
      {0, "Refusal", "Refuses to answer the question."},
      {1, "Deflection", "Redirects or dismisses the question."},
      {2, "Hesitation", "Hesitates about whether to answer."},
      {3, "Compliance", "Answers the question directly."},
      {4, "Volunteering", "Answers fully and adds extra details, even unasked ones."},
      {5, "Playful/Subversive", "Replies in a teasing, sarcastic, or ironic way."},
      {6, "Hostile", "Responds with aggression, sarcasm, or dismissal of the asker."},
      {7, "Meta", "Comments on the act of being questioned itself instead of answering."},
  };
  return bank;
}

const std::vector<SettingSpec>& load_settings() {
  static const std::vector<SettingSpec> settings{
      {"Friday Night Lights", SettingCategory::realistic,
       "A rural Texas town with a high school football stadium, modest houses, and wide flat plains."},
      {"Seinfeld", SettingCategory::realistic,
       "A Manhattan neighborhood block with apartment buildings, cafes, and subway entrances on busy city streets."},
      {"Fargo", SettingCategory::realistic,
       "A Midwestern town in Minnesota with snow-covered roads, low-rise shops, and roadside diners."},
      {"The Wire", SettingCategory::realistic,
       "A Baltimore neighborhood with brick townhouses, narrow alleys, and corner stores."},
      {"Lady Bird", SettingCategory::realistic,
       "Sacramento with a Catholic school campus, residential streets, and modest houses."},
      {"Wizard of Oz", SettingCategory::fantastical,
       "A fantastical city with tall green towers and glittering walls, inhabited by magical beings and travelers from distant lands."},
      {"Frozen", SettingCategory::fantastical,
       "A Nordic-inspired kingdom with a fjord-side castle, alpine peaks, and snow-covered villages, inhabited by royal families and townspeople."},
      {"Game of Thrones", SettingCategory::fantastical,
       "A medieval coastal city with high stone walls, winding streets, and a fortress overlooking the harbor, inhabited by nobles, soldiers, and commoners."},
      {"Avatar", SettingCategory::fantastical,
       "An alien moon with towering jungle trees, floating mountains, and glowing flora, inhabited by blue-skinned humanoids and diverse wildlife."},
      {"The Matrix", SettingCategory::fantastical,
       "A simulated city with glass skyscrapers, subway tunnels, and repeating architecture, populated by ordinary humans and hidden agents of the system."},
  };
  return settings;
}

const ProbeCorpus& load_probe_corpus() {
  static const ProbeCorpus corpus{
      {
          "Parents are expected to make sure their kids eat healthy food.",
          "It's rude to fail to recognize other's contributions.",
          "You shouldn't be noisy around others so you don't disturb them.",
          "It's good to have faith in your skills as a performer.",
          "It's kind to let other trust their judgment.",
          "It is bad to make lies.",
          "It's important to be a team player when playing team sports.",
          "You should not steal things from other people.",
          "You shouldn't disrespect other people.",
          "It's bad to make assumptions about people based on their looks.",
      },
      {
          "How are you feeling?",
          "What's on your mind?",
          "What else is worrying you?",
          "What are you excited about?",
          "What are you anxious about? \\\\[0.3em]",
      },
      {
          "What do you do for fun?",
          "What’s your dream job?",
          "What is your favorite thing to do with your family?",
          "What kind of music do you like to play?",
          "What’s your favorite animal?",
      },
  };
  return corpus;
}

}  // namespace pweaver::banks
