// Fixed class splits for the reorganized ActivityNet1.3 and Thumos14
// datasets. Label spellings follow the upstream annotation files.

#include "fscal/data.hpp"

namespace fscal {

namespace {

const std::vector<std::string> kActivityNetTrain = {
    "Fun sliding down",
    "Beer pong",
    "Getting a piercing",
    "Shoveling snow",
    "Kneeling",
    "Tumbling",
    "Playing water polo",
    "Washing dishes",
    "Blowing leaves",
    "Playing congas",
    "Making a lemonade",
    "Playing kickball",
    "Removing ice from car",
    "Playing racquetball",
    "Swimming",
    "Playing bagpipes",
    "Painting",
    "Assembling bicycle",
    "Playing violin",
    "Surfing",
    "Making a sandwich",
    "Welding",
    "Hopscotch",
    "Gargling mouthwash",
    "Baking cookies",
    "Braiding hair",
    "Capoeira",
    "Slacklining",
    "Plastering",
    "Changing car wheel",
    "Chopping wood",
    "Removing curlers",
    "Horseback riding",
    "Smoking hookah",
    "Doing a powerbomb",
    "Playing ten pins",
    "Getting a haircut",
    "Playing beach volleyball",
    "Making a cake",
    "Clean and jerk",
    "Trimming branches or hedges",
    "Drum corps",
    "Windsurfing",
    "Kite flying",
    "Using parallel bars",
    "Doing kickboxing",
    "Cleaning shoes",
    "Playing field hockey",
    "Playing squash",
    "Rollerblading",
    "Playing drums",
    "Playing rubik cube",
    "Sharpening knives",
    "Zumba",
    "Raking leaves",
    "Bathing dog",
    "Tug of war",
    "Ping-pong",
    "Using the balance beam",
    "Playing lacrosse",
    "Scuba diving",
    "Preparing pasta",
    "Brushing teeth",
    "Playing badminton",
    "Mixing drinks",
    "Discus throw",
    "Playing ice hockey",
    "Doing crunches",
    "Wrapping presents",
    "Hand washing clothes",
    "Rock climbing",
    "Cutting the grass",
    "Wakeboarding",
    "Futsal",
    "Playing piano",
    "Baton twirling",
    "Mooping floor",
    "Triple jump",
    "Longboarding",
    "Polishing shoes",
    "Doing motocross",
    "Arm wrestling",
    "Doing fencing",
    "Hammer throw",
    "Shot put",
    "Playing pool",
    "Blow-drying hair",
    "Cricket",
    "Spinning",
    "Running a marathon",
    "Table soccer",
    "Playing flauta",
    "Ice fishing",
    "Tai chi",
    "Archery",
    "Shaving",
    "Using the monkey bar",
    "Layup drill in basketball",
    "Spread mulch",
    "Skateboarding",
    "Canoeing",
    "Mowing the lawn",
    "Beach soccer",
    "Hanging wallpaper",
    "Tango",
    "Disc dog",
    "Powerbocking",
    "Getting a tattoo",
    "Doing nails",
    "Snowboarding",
    "Putting on shoes",
    "Clipping cat claws",
    "Snow tubing",
    "River tubing",
    "Putting on makeup",
    "Decorating the Christmas tree",
    "Fixing bicycle",
    "Hitting a pinata",
    "High jump",
    "Doing karate",
    "Kayaking",
    "Grooming dog",
    "Bungee jumping",
    "Washing hands",
    "Painting fence",
    "Doing step aerobics",
    "Installing carpet",
    "Playing saxophone",
    "Long jump",
    "Javelin throw",
    "Playing accordion",
    "Smoking a cigarette",
    "Belly dance",
    "Playing polo",
    "Throwing darts",
    "Roof shingle removal",
    "Tennis serve with ball bouncing",
    "Skiing",
    "Peeling potatoes",
    "Elliptical trainer",
    "Building sandcastles",
    "Drinking beer",
    "Rock-paper-scissors",
    "Using the pommel horse",
    "Croquet",
    "Laying tile",
    "Cleaning windows",
    "Fixing the roof",
    "Springboard diving",
    "Waterskiing",
    "Using uneven bars",
    "Having an ice cream",
    "Sailing",
    "Washing face",
    "Knitting",
    "Bullfighting",
    "Applying sunscreen",
    "Painting furniture",
    "Grooming horse",
    "Carving jack-o-lanterns",
};

const std::vector<std::string> kActivityNetVal = {
    "Swinging at the playground",
    "Dodgeball",
    "Ballet",
    "Playing harmonica",
    "Paintball",
    "Cumbia",
    "Rafting",
    "Hula hoop",
    "Cheerleading",
    "Vacuuming floor",
    "Playing blackjack",
    "Waxing skis",
    "Curling",
    "Using the rowing machine",
    "Ironing clothes",
    "Playing guitarra",
    "Sumo",
    "Putting in contact lenses",
    "Brushing hair",
    "Volleyball",
};

const std::vector<std::string> kActivityNetTest = {
    "Hurling",
    "Polishing forniture",
    "BMX",
    "Riding bumper cars",
    "Starting a campfire",
    "Walking the dog",
    "Preparing salad",
    "Plataform diving",
    "Breakdancing",
    "Camel ride",
    "Hand car wash",
    "Making an omelette",
    "Shuffleboard",
    "Calf roping",
    "Shaving legs",
    "Snatch",
    "Cleaning sink",
    "Rope skipping",
    "Drinking coffee",
    "Pole vault",
};

const std::vector<std::string> kThumosTrain = {
    "BaseballPitch",
    "BasketballDunk",
    "Billiards",
    "CleanAndJerk",
    "CliffDiving",
    "CricketBowling",
    "CricketShot",
    "Diving",
    "FrisbeeCatch",
    "GolfSwing",
    "HammerThrow",
    "HighJump",
    "JavelinThrow",
    "LongJump",
    "PoleVault",
    "Shotput",
};

const std::vector<std::string> kThumosVal = {
    "SoccerPenalty",
    "TennisSwing",
};

const std::vector<std::string> kThumosTest = {
    "ThrowDiscus",
    "VolleyballSpiking",
};

}  // namespace

const FixedSplitLists& fixed_split_lists(Dataset dataset) {
  static const FixedSplitLists activitynet{kActivityNetTrain, kActivityNetVal, kActivityNetTest};
  static const FixedSplitLists thumos{kThumosTrain, kThumosVal, kThumosTest};
  return dataset == Dataset::ActivityNet ? activitynet : thumos;
}

}  // namespace fscal
